#include "semcom/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "semcom/channel.hpp"
#include "semcom/corpus.hpp"
#include "semcom/semcodec.hpp"
#include "semcom/trainer.hpp"

namespace semcom {

namespace {

Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
  const auto n = shape_size(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Magnitudes bounded away from zero, for kinked ops like relu.
Tensor rand_offzero(Shape shape, Rng& rng) {
  const auto n = shape_size(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) {
    const double mag = rng.uniform(0.2, 1.2);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Pairwise gaps along the last axis stay above `min_gap`, so max/argmax
// decisions cannot flip under the finite-difference step.
Tensor rand_gapped(Shape shape, Rng& rng, double min_gap) {
  for (;;) {
    Tensor t = rand_uniform(shape, rng, -1.0, 1.0);
    const int L = shape.back();
    const auto outer = t.size() / L;
    bool ok = true;
    const auto& v = t.data();
    for (std::int64_t o = 0; o < outer && ok; ++o) {
      for (int i = 0; i < L && ok; ++i) {
        for (int j = i + 1; j < L; ++j) {
          if (std::abs(v[static_cast<std::size_t>(o) * L + i] -
                       v[static_cast<std::size_t>(o) * L + j]) < min_gap) {
            ok = false;
            break;
          }
        }
      }
    }
    if (ok) return t;
  }
}

double eval_scalar(const std::function<Tensor(const std::vector<Tensor>&)>& forward,
                   const std::vector<Tensor>& inputs) {
  return forward(inputs).value();
}

double rel_err(double fd, double an) {
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
}

}  // namespace

double max_relative_gradient_error(
    const std::vector<Tensor>& inputs,
    const std::function<Tensor(const std::vector<Tensor>&)>& forward, double step) {
  Tape tape;
  std::vector<Tensor> tracked;
  tracked.reserve(inputs.size());
  for (const auto& t : inputs) tracked.push_back(tape.watch(t));
  Tensor out = forward(tracked);
  tape.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : tracked) analytic.push_back(tape.grad(t));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& base = inputs[i].data();
    for (std::size_t j = 0; j < base.size(); ++j) {
      std::vector<Tensor> bumped = inputs;
      std::vector<double> vplus = base;
      vplus[j] += step;
      bumped[i] = Tensor::from_data(inputs[i].shape(), std::move(vplus));
      const double fplus = eval_scalar(forward, bumped);
      std::vector<double> vminus = base;
      vminus[j] -= step;
      bumped[i] = Tensor::from_data(inputs[i].shape(), std::move(vminus));
      const double fminus = eval_scalar(forward, bumped);
      const double fd = (fplus - fminus) / (2.0 * step);
      worst = std::max(worst, rel_err(fd, analytic[i].data()[j]));
    }
  }
  return worst;
}

namespace {

// Same check but sampling a fixed number of coordinates per input; used for
// large parameter sets where the full sweep would be wasteful.
double max_relative_gradient_error_sampled(
    const std::vector<Tensor>& inputs,
    const std::function<Tensor(const std::vector<Tensor>&)>& forward, double step,
    int coords_per_input, Rng& rng) {
  Tape tape;
  std::vector<Tensor> tracked;
  tracked.reserve(inputs.size());
  for (const auto& t : inputs) tracked.push_back(tape.watch(t));
  Tensor out = forward(tracked);
  tape.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : tracked) analytic.push_back(tape.grad(t));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& base = inputs[i].data();
    const int n_coords = std::min<int>(coords_per_input, static_cast<int>(base.size()));
    for (int c = 0; c < n_coords; ++c) {
      const auto j = static_cast<std::size_t>(rng.uniform_below(base.size()));
      std::vector<Tensor> bumped = inputs;
      std::vector<double> vplus = base;
      vplus[j] += step;
      bumped[i] = Tensor::from_data(inputs[i].shape(), std::move(vplus));
      const double fplus = eval_scalar(forward, bumped);
      std::vector<double> vminus = base;
      vminus[j] -= step;
      bumped[i] = Tensor::from_data(inputs[i].shape(), std::move(vminus));
      const double fminus = eval_scalar(forward, bumped);
      const double fd = (fplus - fminus) / (2.0 * step);
      worst = std::max(worst, rel_err(fd, analytic[i].data()[j]));
    }
  }
  return worst;
}

struct SuiteBuilder {
  explicit SuiteBuilder(const GradCheckOptions& o) : opts(o), rng(o.seed) {}

  GradCheckOptions opts;
  Rng rng;
  std::vector<GradCheckResult> results;

  void check(const std::string& name, const std::vector<Tensor>& inputs,
             const std::function<Tensor(const std::vector<Tensor>&)>& fwd) {
    GradCheckResult r;
    r.name = name;
    r.max_rel_err = max_relative_gradient_error(inputs, fwd, opts.step);
    r.pass = r.max_rel_err < opts.tolerance;
    results.push_back(std::move(r));
  }

  int dim(int lo, int hi) { return lo + static_cast<int>(rng.uniform_below(hi - lo + 1)); }
};

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opts) {
  SuiteBuilder sb(opts);
  auto& rng = sb.rng;

  for (int rep = 0; rep < opts.shapes_per_op; ++rep) {
    const std::string tag = "#" + std::to_string(rep);

    {
      Shape s = {sb.dim(2, 4), sb.dim(2, 5)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("add" + tag,
               {rand_uniform(s, rng, -1, 1), rand_uniform(s, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(add(in[0], in[1]), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 3), sb.dim(2, 4), sb.dim(2, 4)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("mul" + tag,
               {rand_uniform(s, rng, -1, 1), rand_uniform(s, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(mul(in[0], in[1]), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 5), sb.dim(2, 5)};
      const double f = rng.uniform(-2.0, 2.0);
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("scale" + tag, {rand_uniform(s, rng, -1, 1)},
               [proj, f](const std::vector<Tensor>& in) {
                 return sum_all(mul(scale(in[0], f), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 4), sb.dim(2, 4)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("scale_scalar" + tag,
               {rand_uniform(s, rng, -1, 1), rand_uniform({1}, rng, 0.5, 1.5)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(scale_scalar(in[0], in[1]), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), C = sb.dim(2, 4), L = sb.dim(2, 4);
      Tensor proj = rand_uniform({B, C, L}, rng, -1, 1);
      sb.check("scale_channels" + tag,
               {rand_uniform({B, C, L}, rng, -1, 1), rand_uniform({B, C}, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(scale_channels(in[0], in[1]), proj));
               });
    }
    {
      const int m = sb.dim(2, 4), k = sb.dim(2, 4), n = sb.dim(2, 4);
      Tensor proj = rand_uniform({m, n}, rng, -1, 1);
      sb.check("matmul2d" + tag,
               {rand_uniform({m, k}, rng, -1, 1), rand_uniform({k, n}, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(matmul(in[0], in[1]), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), m = sb.dim(2, 3), k = sb.dim(2, 3), n = sb.dim(2, 3);
      Tensor proj = rand_uniform({B, m, n}, rng, -1, 1);
      sb.check("matmul3d" + tag,
               {rand_uniform({B, m, k}, rng, -1, 1), rand_uniform({B, k, n}, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(matmul(in[0], in[1]), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), m = sb.dim(2, 4), n = sb.dim(2, 4);
      Tensor proj = rand_uniform({B, n, m}, rng, -1, 1);
      sb.check("transpose" + tag, {rand_uniform({B, m, n}, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(transpose(in[0]), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 4), sb.dim(2, 5)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("sigmoid" + tag, {rand_uniform(s, rng, -2, 2)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(sigmoid(in[0]), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 4), sb.dim(2, 5)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("relu" + tag, {rand_offzero(s, rng)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(relu(in[0]), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), L = sb.dim(2, 4), n = sb.dim(2, 5);
      const int axis = 2;
      Tensor proj = rand_uniform({B, L, n}, rng, -1, 1);
      sb.check("softmax.axis2" + tag, {rand_uniform({B, L, n}, rng, -2, 2)},
               [proj, axis](const std::vector<Tensor>& in) {
                 return sum_all(mul(softmax(in[0], axis), proj));
               });
    }
    {
      const int m = sb.dim(2, 4), n = sb.dim(2, 5);
      Tensor proj = rand_uniform({m, n}, rng, -1, 1);
      sb.check("softmax.axis0" + tag, {rand_uniform({m, n}, rng, -2, 2)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(softmax(in[0], 0), proj));
               });
    }
    {
      const int L = sb.dim(2, 4), d = sb.dim(3, 6);
      Tensor proj = rand_uniform({L, d}, rng, -1, 1);
      sb.check("layer_norm" + tag,
               {rand_uniform({L, d}, rng, -1, 1), rand_uniform({d}, rng, 0.5, 1.5),
                rand_uniform({d}, rng, -0.5, 0.5)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(layer_norm(in[0], in[1], in[2]), proj));
               });
    }
    {
      const int B = sb.dim(1, 2), ci = sb.dim(2, 3), co = sb.dim(2, 3), L = sb.dim(3, 6);
      const int k = 1 + 2 * static_cast<int>(rng.uniform_below(3));  // 1, 3, 5
      Tensor proj = rand_uniform({B, co, L}, rng, -1, 1);
      sb.check("conv1d.same" + tag,
               {rand_uniform({B, ci, L}, rng, -1, 1), rand_uniform({co, ci, k}, rng, -1, 1),
                rand_uniform({co}, rng, -0.5, 0.5)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(conv1d(in[0], in[1], in[2], PadMode::kSame), proj));
               });
    }
    {
      const int B = sb.dim(1, 2), ci = sb.dim(2, 3), co = sb.dim(2, 3), L = sb.dim(3, 6);
      Tensor proj = rand_uniform({B, co, L}, rng, -1, 1);
      sb.check("conv1d.causal" + tag,
               {rand_uniform({B, ci, L}, rng, -1, 1), rand_uniform({co, ci, 3}, rng, -1, 1),
                rand_uniform({co}, rng, -0.5, 0.5)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(conv1d(in[0], in[1], in[2], PadMode::kCausalLeft), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), C = sb.dim(2, 4), L = sb.dim(3, 5);
      Tensor proj = rand_uniform({B, C}, rng, -1, 1);
      sb.check("global_maxpool" + tag, {rand_gapped({B, C, L}, rng, 1e-3)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(global_maxpool(in[0]), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), C = sb.dim(2, 3), L = sb.dim(3, 5);
      Tensor proj = rand_uniform({B, C, L}, rng, -1, 1);
      sb.check("cummax_last" + tag, {rand_gapped({B, C, L}, rng, 1e-3)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(cummax_last(in[0]), proj));
               });
    }
    {
      const int B = sb.dim(2, 3), L = sb.dim(2, 3);
      const int d1 = sb.dim(2, 3), d2 = sb.dim(2, 3), d3 = sb.dim(2, 3);
      Tensor proj = rand_uniform({B, L, d1 + d2 + d3}, rng, -1, 1);
      sb.check("concat.axis2" + tag,
               {rand_uniform({B, L, d1}, rng, -1, 1), rand_uniform({B, L, d2}, rng, -1, 1),
                rand_uniform({B, L, d3}, rng, -1, 1)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(concat({in[0], in[1], in[2]}, 2), proj));
               });
    }
    {
      const int V = sb.dim(4, 8), d = sb.dim(2, 4), B = sb.dim(1, 2), L = sb.dim(2, 4);
      IdMatrix ids;
      ids.rows = B;
      ids.cols = L;
      for (int i = 0; i < B * L; ++i) {
        ids.ids.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(V))));
      }
      Tensor proj = rand_uniform({B, L, d}, rng, -1, 1);
      sb.check("embedding_lookup" + tag, {rand_uniform({V, d}, rng, -1, 1)},
               [proj, ids](const std::vector<Tensor>& in) {
                 return sum_all(mul(embedding_lookup(in[0], ids), proj));
               });
    }
    {
      const int B = sb.dim(1, 2), L = sb.dim(2, 3), di = sb.dim(2, 4), dout = sb.dim(2, 4);
      Tensor proj = rand_uniform({B, L, dout}, rng, -1, 1);
      sb.check("dense" + tag,
               {rand_uniform({B, L, di}, rng, -1, 1), rand_uniform({di, dout}, rng, -1, 1),
                rand_uniform({dout}, rng, -0.5, 0.5)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(dense(in[0], in[1], in[2]), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 4), sb.dim(2, 4)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("rsqrt" + tag, {rand_uniform(s, rng, 0.5, 2.0)},
               [proj](const std::vector<Tensor>& in) {
                 return sum_all(mul(rsqrt(in[0]), proj));
               });
    }
    {
      Shape s = {sb.dim(2, 4), sb.dim(2, 4)};
      sb.check("sum_all" + tag, {rand_uniform(s, rng, -1, 1)},
               [](const std::vector<Tensor>& in) { return sum_all(in[0]); });
      sb.check("mean_all" + tag, {rand_uniform(s, rng, -1, 1)},
               [](const std::vector<Tensor>& in) { return mean_all(in[0]); });
    }
    {
      const int m = sb.dim(2, 4), n = sb.dim(2, 4);
      Tensor proj = rand_uniform({m * n}, rng, -1, 1);
      sb.check("reshape" + tag, {rand_uniform({m, n}, rng, -1, 1)},
               [proj, m, n](const std::vector<Tensor>& in) {
                 return sum_all(mul(reshape(in[0], {m * n}), proj));
               });
    }
    {
      const int B = sb.dim(1, 2), L = sb.dim(2, 4), V = sb.dim(4, 7);
      IdMatrix targets;
      targets.rows = B;
      targets.cols = L;
      std::vector<std::uint8_t> mask;
      for (int i = 0; i < B * L; ++i) {
        targets.ids.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(V))));
        mask.push_back(rng.uniform() < 0.7 ? 1 : 0);
      }
      mask[0] = 1;  // at least one scored position
      sb.check("cross_entropy" + tag, {rand_uniform({B, L, V}, rng, -2, 2)},
               [targets, mask](const std::vector<Tensor>& in) {
                 return cross_entropy_with_logits(in[0], targets, mask);
               });
    }
    {
      // Diamond reuse: the same node feeds two consumers.
      Shape s = {sb.dim(2, 4), sb.dim(2, 4)};
      Tensor proj = rand_uniform(s, rng, -1, 1);
      sb.check("diamond" + tag, {rand_uniform(s, rng, 0.5, 1.5)},
               [proj](const std::vector<Tensor>& in) {
                 Tensor y = sigmoid(in[0]);
                 return sum_all(mul(mul(y, y), proj));
               });
    }
  }
  return sb.results;
}

GradCheckResult run_composition_check(const GradCheckOptions& opts) {
  ModelConfig cfg;
  cfg.vocab_size = 20;
  cfg.model_dim = 16;
  cfg.ffn_dim = 32;
  cfg.num_heads = 4;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 1;
  cfg.kernel_sizes = {3, 5, 7};
  cfg.bottleneck_ratio = 4;
  cfg.max_positions = 16;
  cfg.chan_hidden = 24;
  cfg.symbol_reals = 8;
  cfg.chan_dec_h1 = 16;
  cfg.chan_dec_h2 = 24;

  Rng rng(opts.seed);
  ModelParams proto = init_params(cfg, rng);

  // Two sentences of 3 and 4 tokens; framed length 6.
  std::vector<std::vector<int>> sentences = {{5, 9, 12}, {4, 7, 15, 18}};
  corpus::TokenBatch batch = corpus::make_batch(sentences);

  IdMatrix dec_ids;
  dec_ids.rows = batch.batch();
  dec_ids.cols = batch.max_len() - 1;
  std::vector<std::uint8_t> dec_mask, tgt_mask;
  IdMatrix targets = dec_ids;
  for (int b = 0; b < batch.batch(); ++b) {
    for (int i = 0; i < dec_ids.cols; ++i) {
      const std::size_t src = static_cast<std::size_t>(b) * batch.max_len();
      dec_ids.ids.push_back(batch.ids.ids[src + i]);
      dec_mask.push_back(batch.pad_mask[src + i]);
      targets.ids.push_back(batch.ids.ids[src + i + 1]);
      tgt_mask.push_back(batch.pad_mask[src + i + 1]);
    }
  }

  std::vector<std::string> names;
  std::vector<Tensor> inputs;
  proto.for_each([&](const std::string& n, const Tensor& t) {
    names.push_back(n);
    inputs.push_back(t);
  });

  const std::uint64_t channel_seed = opts.seed ^ 0xabcdef12ULL;
  auto forward = [&, channel_seed](const std::vector<Tensor>& in) {
    ModelParams p = proto;
    std::size_t i = 0;
    p.for_each([&](const std::string&, Tensor& t) { t = in[i++]; });
    Tensor memory = encode(batch, p, cfg);
    SymbolFrame frame = channel_encode(memory, batch.pad_mask, p.chan_enc, cfg);
    // The same noise and gains are redrawn on every call, so the channel is
    // a fixed affine map and finite differences see the true Jacobian.
    Rng chan_rng(channel_seed);
    ChannelRealization real =
        draw_realization(ChannelKind::kRayleighBlock, 10.0, batch.batch(), chan_rng);
    frame = apply_channel(frame, real, chan_rng);
    Tensor received = channel_decode(frame, p.chan_dec, cfg);
    Tensor logits = decode_forward(received, batch.pad_mask, dec_ids, dec_mask, p, cfg);
    return cross_entropy_with_logits(logits, targets, tgt_mask);
  };

  Rng coord_rng(opts.seed + 99);
  GradCheckResult r;
  r.name = "composition(enc->chan->dec, d=16, L=6, vocab=20)";
  r.max_rel_err =
      max_relative_gradient_error_sampled(inputs, forward, opts.step, 6, coord_rng);
  r.pass = r.max_rel_err < opts.composition_tolerance;
  return r;
}

}  // namespace semcom
