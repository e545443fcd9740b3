#include "semcom/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "semcom/error.hpp"

namespace semcom {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 24, kTop = 36, kBottom = 56;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* scheme_color(const std::string& scheme) {
  if (scheme == "proposed") return "#1f77b4";
  if (scheme == "huffman_turbo") return "#d62728";
  return "#2ca02c";
}

struct Series {
  std::string scheme;
  std::vector<std::pair<double, double>> points;  // (snr, seed-mean value)
};

}  // namespace

std::vector<std::string> write_plots(const std::vector<ExperimentRecord>& records,
                                     const std::string& outdir) {
  std::vector<std::string> warnings;
  std::filesystem::create_directories(outdir);

  std::vector<std::string> channels;
  std::vector<std::string> schemes;
  for (const auto& r : records) {
    if (std::find(channels.begin(), channels.end(), r.channel) == channels.end()) {
      channels.push_back(r.channel);
    }
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) {
      schemes.push_back(r.scheme);
    }
  }
  std::sort(channels.begin(), channels.end());
  std::sort(schemes.begin(), schemes.end());

  const std::pair<std::string, double ExperimentRecord::*> metrics[] = {
      {"avg_bleu", &ExperimentRecord::avg_bleu},
      {"similarity", &ExperimentRecord::similarity}};

  for (const auto& [metric_name, member] : metrics) {
    for (const auto& channel : channels) {
      double snr_min = 0.0, snr_max = 0.0;
      bool have_any = false;

      std::vector<Series> series_list;
      for (const auto& scheme : schemes) {
        // seed-average per SNR
        std::map<double, std::pair<double, int>> acc;
        for (const auto& r : records) {
          if (r.channel != channel || r.scheme != scheme) continue;
          acc[r.snr_db].first += r.*member;
          acc[r.snr_db].second += 1;
        }
        Series s;
        s.scheme = scheme;
        for (const auto& [snr, sum_count] : acc) {
          s.points.emplace_back(snr, sum_count.first / sum_count.second);
          if (!have_any) {
            snr_min = snr_max = snr;
            have_any = true;
          } else {
            snr_min = std::min(snr_min, snr);
            snr_max = std::max(snr_max, snr);
          }
        }
        if (s.points.empty()) {
          warnings.push_back("plot " + metric_name + "/" + channel + ": series '" + scheme +
                             "' has no points and was omitted");
          continue;
        }
        series_list.push_back(std::move(s));
      }
      if (series_list.empty()) {
        warnings.push_back("plot " + metric_name + "/" + channel + ": no data, file skipped");
        continue;
      }
      if (snr_max == snr_min) snr_max = snr_min + 1.0;

      auto x_of = [&](double snr) {
        return kLeft + (snr - snr_min) / (snr_max - snr_min) * (kWidth - kLeft - kRight);
      };
      auto y_of = [&](double v) {
        return kHeight - kBottom - v * (kHeight - kTop - kBottom);  // v in [0,1]
      };

      std::string svg;
      svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
             "\" height=\"" + fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " +
             fmt(kHeight) + "\">\n";
      svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
      svg += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" "
             "font-family=\"sans-serif\" font-size=\"16\">" +
             metric_name + " vs SNR (" + channel + ")</text>\n";

      // axes
      svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kHeight - kBottom) + "\" x2=\"" +
             fmt(kWidth - kRight) + "\" y2=\"" + fmt(kHeight - kBottom) +
             "\" stroke=\"black\"/>\n";
      svg += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) +
             "\" y2=\"" + fmt(kHeight - kBottom) + "\" stroke=\"black\"/>\n";

      for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        const double y = y_of(v);
        svg += "<line x1=\"" + fmt(kLeft - 4) + "\" y1=\"" + fmt(y) + "\" x2=\"" +
               fmt(kWidth - kRight) + "\" y2=\"" + fmt(y) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + fmt(kLeft - 8) + "\" y=\"" + fmt(y + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + fmt(v) +
               "</text>\n";
      }
      std::vector<double> xticks;
      for (const auto& s : series_list) {
        for (const auto& [snr, _] : s.points) {
          if (std::find(xticks.begin(), xticks.end(), snr) == xticks.end()) {
            xticks.push_back(snr);
          }
        }
      }
      std::sort(xticks.begin(), xticks.end());
      for (double snr : xticks) {
        const double x = x_of(snr);
        svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(kHeight - kBottom) + "\" x2=\"" +
               fmt(x) + "\" y2=\"" + fmt(kHeight - kBottom + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(kHeight - kBottom + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
               fmt(snr) + "</text>\n";
      }
      svg += "<text x=\"" + fmt((kLeft + kWidth - kRight) / 2) + "\" y=\"" +
             fmt(kHeight - 14) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"14\">SNR (dB)</text>\n";
      svg += "<text x=\"18\" y=\"" + fmt((kTop + kHeight - kBottom) / 2) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
             "transform=\"rotate(-90 18 " +
             fmt((kTop + kHeight - kBottom) / 2) + ")\">" + metric_name + "</text>\n";

      double legend_y = kTop + 12;
      for (const auto& s : series_list) {
        const char* color = scheme_color(s.scheme);
        std::string path;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
          path += (i == 0 ? "M" : "L");
          path += fmt(x_of(s.points[i].first)) + " " + fmt(y_of(s.points[i].second)) + " ";
        }
        svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        for (const auto& [snr, v] : s.points) {
          svg += "<circle cx=\"" + fmt(x_of(snr)) + "\" cy=\"" + fmt(y_of(v)) +
                 "\" r=\"3.5\" fill=\"" + color + "\"/>\n";
        }
        svg += "<line x1=\"" + fmt(kWidth - kRight - 160) + "\" y1=\"" + fmt(legend_y) +
               "\" x2=\"" + fmt(kWidth - kRight - 132) + "\" y2=\"" + fmt(legend_y) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + fmt(kWidth - kRight - 126) + "\" y=\"" + fmt(legend_y + 4) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + s.scheme + "</text>\n";
        legend_y += 18;
      }
      svg += "</svg>\n";

      const auto path = std::filesystem::path(outdir) / (metric_name + "_" + channel + ".svg");
      std::ofstream out(path);
      if (!out) throw IoError("cannot write plot: " + path.string());
      out << svg;
    }
  }
  return warnings;
}

}  // namespace semcom
