#include "semcom/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "semcom/error.hpp"

namespace semcom {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'C', 'O', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

std::int32_t read_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  for (int v : {cfg.vocab_size, cfg.model_dim, cfg.ffn_dim, cfg.num_heads, cfg.encoder_layers,
                cfg.decoder_layers, cfg.kernel_sizes[0], cfg.kernel_sizes[1],
                cfg.kernel_sizes[2], cfg.bottleneck_ratio, cfg.max_positions, cfg.chan_hidden,
                cfg.symbol_reals, cfg.chan_dec_h1, cfg.chan_dec_h2}) {
    write_i32(out, v);
  }
  std::uint32_t count = 0;
  params.for_each([&count](const std::string&, const Tensor&) { ++count; });
  write_u32(out, count);
  params.for_each([&out](const std::string& name, const Tensor& t) {
    const auto name_len = static_cast<std::uint32_t>(name.size());
    write_u32(out, name_len);
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) write_i32(out, t.dim(i));
    const auto& v = t.data();
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  });
  if (!out) throw IoError("failed while writing checkpoint: " + path);
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  const auto version = read_u32(in);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  ModelConfig cfg;
  cfg.vocab_size = read_i32(in);
  cfg.model_dim = read_i32(in);
  cfg.ffn_dim = read_i32(in);
  cfg.num_heads = read_i32(in);
  cfg.encoder_layers = read_i32(in);
  cfg.decoder_layers = read_i32(in);
  cfg.kernel_sizes[0] = read_i32(in);
  cfg.kernel_sizes[1] = read_i32(in);
  cfg.kernel_sizes[2] = read_i32(in);
  cfg.bottleneck_ratio = read_i32(in);
  cfg.max_positions = read_i32(in);
  cfg.chan_hidden = read_i32(in);
  cfg.symbol_reals = read_i32(in);
  cfg.chan_dec_h1 = read_i32(in);
  cfg.chan_dec_h2 = read_i32(in);
  if (!in) throw DataError("truncated checkpoint header: " + path);
  cfg.validate();

  std::map<std::string, Tensor> entries;
  const auto count = read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_u32(in);
    if (!in || name_len > 4096) throw DataError("corrupt checkpoint record in " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_u32(in);
    if (!in || rank > 8) throw DataError("corrupt checkpoint record in " + path);
    Shape shape(rank);
    for (auto& d : shape) d = read_i32(in);
    const auto n = shape_size(shape);
    std::vector<double> values(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint data in " + path);
    entries.emplace(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
  }

  // Materialize a parameter set with the right structure, then fill it.
  Rng rng(0);
  ModelParams params = init_params(cfg, rng);
  std::size_t filled = 0;
  params.for_each([&](const std::string& name, Tensor& t) {
    auto it = entries.find(name);
    if (it == entries.end()) {
      throw DataError("checkpoint " + path + " is missing parameter " + name);
    }
    if (it->second.shape() != t.shape()) {
      throw DataError("checkpoint " + path + ": parameter " + name + " has shape " +
                      shape_str(it->second.shape()) + ", expected " + shape_str(t.shape()));
    }
    t = it->second;
    ++filled;
  });
  if (filled != entries.size()) {
    throw DataError("checkpoint " + path + " carries " + std::to_string(entries.size()) +
                    " parameters, expected " + std::to_string(filled));
  }
  return {cfg, std::move(params)};
}

}  // namespace semcom
