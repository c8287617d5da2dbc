#include "revar/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "revar/error.hpp"
#include "revar/persistence.hpp"
#include "revar/pipeline.hpp"

namespace revar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string number(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

json to_json(const EvaluationConfig& c) {
  return {{"welch",
           {{"segment_length", c.welch.segment_length},
            {"overlap", c.welch.overlap},
            {"window", to_string(c.welch.window)}}},
          {"max_dx", c.max_dx},
          {"max_dy", c.max_dy},
          {"min_pairs", c.min_pairs},
          {"remove_piston", c.remove_piston}};
}

json to_json(const EvaluationReport& r) {
  return {{"slopes_tps_nrmse", r.slopes_tps_nrmse},
          {"opd_tps_nrmse", r.opd_tps_nrmse},
          {"opd_rms_relative_error", r.opd_rms_relative_error},
          {"structure_function_nrmse", r.structure_function_nrmse},
          {"replicates", r.replicates},
          {"reference_opd_rms", r.reference_opd_rms},
          {"synthetic_opd_rms", r.synthetic_opd_rms},
          {"config", to_json(r.config)}};
}

std::string spectrum_csv(const SpectrumEstimate& reference, const SpectrumEstimate* synthetic) {
  if (synthetic && synthetic->power.size() != reference.power.size()) {
    throw InputError("spectra have different lengths");
  }
  std::ostringstream out;
  out << (reference.sampling_frequency ? "frequency_hz" : "frequency_cycles_per_step")
      << ",reference" << (synthetic ? ",synthetic" : "") << "\n";
  for (std::size_t k = 0; k < reference.power.size(); ++k) {
    out << number(reference.frequencies[k]) << ',' << number(reference.power[k]);
    if (synthetic) out << ',' << number(synthetic->power[k]);
    out << '\n';
  }
  return out.str();
}

std::string structure_csv(const StructureFunction2D& reference,
                          const StructureFunction2D* synthetic) {
  if (synthetic && synthetic->values.size() != reference.values.size()) {
    throw InputError("structure functions cover different ranges");
  }
  std::ostringstream out;
  out << "dx,dy,reference" << (synthetic ? ",synthetic" : "") << ",count\n";
  for (std::ptrdiff_t dy = -reference.max_dy; dy <= reference.max_dy; ++dy) {
    for (std::ptrdiff_t dx = -reference.max_dx; dx <= reference.max_dx; ++dx) {
      const auto k = reference.offset_index(dx, dy);
      out << dx << ',' << dy << ',' << number(reference.values[k]);
      if (synthetic) out << ',' << number(synthetic->values[k]);
      out << ',' << reference.counts[k] << '\n';
    }
  }
  return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "lags,training_mse";
  if (sweep.evaluated) {
    out << ",opd_tps_nrmse,slopes_tps_nrmse,opd_rms_relative_error,structure_function_nrmse";
  }
  out << '\n';
  for (const auto& r : sweep.rows) {
    out << r.lags << ',' << number(r.training_mse);
    if (r.evaluation) {
      out << ',' << number(r.evaluation->opd_tps_nrmse) << ','
          << number(r.evaluation->slopes_tps_nrmse) << ','
          << number(r.evaluation->opd_rms_relative_error) << ','
          << number(r.evaluation->structure_function_nrmse);
    }
    out << '\n';
  }
  return out.str();
}

std::string svg_line_chart(const std::vector<Series2D>& series, const ChartOptions& o) {
  constexpr double kWidth = 640, kHeight = 420, kLeft = 80, kRight = 20, kTop = 40, kBottom = 60;
  static const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  auto tx = [&](double v) { return o.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return o.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!o.log_x || x > 0) && (!o.log_y || y > 0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return kTop + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  std::ostringstream out;
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(o.title) << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x0 + (x1 - x0) * t / 4.0;
    const double fy = y0 + (y1 - y0) * t / 4.0;
    const double gx = kLeft + pw * t / 4.0;
    const double gy = kTop + ph - ph * t / 4.0;
    out << "<text x=\"" << gx << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << (o.log_x ? "1e" : "") << std::setprecision(3) << fx << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">"
        << (o.log_y ? "1e" : "") << fy << std::setprecision(6) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(o.y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kColours[s % std::size(kColours)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    const auto& cur = series[s];
    for (std::size_t i = 0; i < std::min(cur.x.size(), cur.y.size()); ++i) {
      if (!usable(cur.x[i], cur.y[i])) continue;
      out << px(cur.x[i]) << ',' << py(cur.y[i]) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << kLeft + pw - 8 << "\" y=\"" << kTop + 16 + 16 * static_cast<double>(s)
        << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << escape(cur.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_heatmap(const std::vector<double>& values, std::size_t width, std::size_t height,
                        const std::string& title) {
  if (values.size() != width * height) throw InputError("heatmap grid has the wrong size");
  constexpr double kCell = 360.0;
  const double cw = kCell / static_cast<double>(std::max<std::size_t>(width, 1));
  const double ch = kCell / static_cast<double>(std::max<std::size_t>(height, 1));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo < hi)) hi = lo + 1.0;
  std::ostringstream out;
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCell + 40 << "\" height=\""
      << kCell + 70 << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << (kCell + 40) / 2 << "\" y=\"22\" text-anchor=\"middle\">" << escape(title)
      << "</text>\n";
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double v = values[r * width + c];
      const double t = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const int red = static_cast<int>(std::lround(255 * t));
      const int blue = 255 - red;
      out << "<rect x=\"" << 20 + cw * static_cast<double>(c) << "\" y=\""
          << 40 + ch * static_cast<double>(height - 1 - r) << "\" width=\"" << cw
          << "\" height=\"" << ch << "\" fill=\"rgb(" << red << ",64," << blue << ")\"/>\n";
    }
  }
  out << "<text x=\"20\" y=\"" << kCell + 60 << "\">min " << lo << "  max " << hi << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

namespace {

std::vector<Series2D> spectrum_pair(const SpectrumEstimate& ref, const SpectrumEstimate& syn) {
  // DC is dropped so the log axis stays usable.
  auto tail = [](const std::vector<double>& v) { return std::vector<double>(v.begin() + 1, v.end()); };
  return {{"reference", tail(ref.frequencies), tail(ref.power)},
          {"synthetic", tail(syn.frequencies), tail(syn.power)}};
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + ": cannot create directory");
}

}  // namespace

void write_evaluation_outputs(const EvaluationReport& report, const fs::path& dir) {
  ensure_directory(dir);
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(dir / "opd_tps.csv", spectrum_csv(report.reference_opd_tps, &report.synthetic_opd_tps));
  write_text(dir / "slopes_tps.csv",
             spectrum_csv(report.reference_slopes_tps, &report.synthetic_slopes_tps));
  write_text(dir / "structure_function.csv",
             structure_csv(report.reference_structure, &report.synthetic_structure));
  const char* freq = report.reference_opd_tps.sampling_frequency ? "frequency [Hz]"
                                                                  : "frequency [cycles/step]";
  write_text(dir / "opd_tps.svg",
             svg_line_chart(spectrum_pair(report.reference_opd_tps, report.synthetic_opd_tps),
                            {"OPD temporal power spectrum", freq, "PSD", true, true}));
  write_text(dir / "slopes_tps.svg",
             svg_line_chart(spectrum_pair(report.reference_slopes_tps, report.synthetic_slopes_tps),
                            {"Streamwise slopes temporal power spectrum", freq, "PSD", true, true}));
  const auto& sf = report.reference_structure;
  write_text(dir / "structure_reference.svg",
             svg_heatmap(sf.values, sf.width(), sf.height(), "Structure function (reference)"));
  const auto& ss = report.synthetic_structure;
  write_text(dir / "structure_synthetic.svg",
             svg_heatmap(ss.values, ss.width(), ss.height(), "Structure function (synthetic)"));
}

void write_sweep_outputs(const SweepResult& sweep, const fs::path& dir) {
  ensure_directory(dir);
  write_text(dir / "sweep.json", sweep.to_json().dump(2) + "\n");
  write_text(dir / "sweep.csv", sweep_csv(sweep));
  Series2D mse{"training MSE", {}, {}};
  std::vector<Series2D> errors;
  if (sweep.evaluated) {
    errors = {{"OPD TPS NRMSE", {}, {}}, {"slopes TPS NRMSE", {}, {}},
              {"OPD_rms rel. error", {}, {}}, {"structure fn NRMSE", {}, {}}};
  }
  for (const auto& r : sweep.rows) {
    const auto l = static_cast<double>(r.lags);
    mse.x.push_back(l);
    mse.y.push_back(r.training_mse);
    if (r.evaluation) {
      const double v[] = {r.evaluation->opd_tps_nrmse, r.evaluation->slopes_tps_nrmse,
                          r.evaluation->opd_rms_relative_error,
                          r.evaluation->structure_function_nrmse};
      for (std::size_t k = 0; k < 4; ++k) {
        errors[k].x.push_back(l);
        errors[k].y.push_back(100.0 * v[k]);
      }
    }
  }
  write_text(dir / "training_mse.svg",
             svg_line_chart({mse}, {"Training MSE vs lags", "N_L", "MSE", false, true}));
  if (sweep.evaluated) {
    write_text(dir / "errors.svg",
               svg_line_chart(errors, {"Held-out error vs lags", "N_L", "error [%]", false, false}));
  }
}

}  // namespace revar
