#include "eotr/app/plot.hpp"

#include "eotr/app/output.hpp"
#include "eotr/regression.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace eotr::app {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 24, kTop = 40, kBottom = 60;

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  std::string label;

  double to_unit(double v) const {
    if (log) return (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    return (v - lo) / (hi - lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = int(std::floor(std::log10(lo))); e <= int(std::ceil(std::log10(hi))); ++e) {
        const double t = std::pow(10.0, e);
        if (t >= lo * (1 - 1e-9) && t <= hi * (1 + 1e-9)) out.push_back(t);
      }
      if (out.size() < 2) out = {lo, hi};
      return out;
    }
    const double raw = (hi - lo) / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0})
      if (raw <= m * mag) {
        step = m * mag;
        break;
      }
    for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) out.push_back(std::abs(t) < step * 1e-9 ? 0 : t);
    return out;
  }
};

Axis fit_axis(std::vector<double> values, bool log, std::string label) {
  Axis a;
  a.log = log;
  a.label = std::move(label);
  if (log) values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !(v > 0); }), values.end());
  if (values.empty()) return a;
  a.lo = *std::min_element(values.begin(), values.end());
  a.hi = *std::max_element(values.begin(), values.end());
  if (log) {
    if (a.hi <= a.lo) a.hi = a.lo * 10;
    a.lo /= 1.15;
    a.hi *= 1.15;
  } else {
    if (a.hi <= a.lo) {
      a.lo -= 0.5;
      a.hi += 0.5;
    }
    const double pad = 0.05 * (a.hi - a.lo);
    a.lo -= pad;
    a.hi += pad;
  }
  return a;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

class Chart {
 public:
  Chart(Axis x, Axis y, std::string title) : x_(std::move(x)), y_(std::move(y)), title_(std::move(title)) {}

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& cls,
                const std::string& style) {
    std::ostringstream s;
    s << "  <polyline class=\"" << cls << "\" fill=\"none\" " << style << " points=\"";
    bool first = true;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if ((x_.log && !(xs[k] > 0)) || (y_.log && !(ys[k] > 0)) || !std::isfinite(ys[k])) continue;
      s << (first ? "" : " ") << px(xs[k]) << ',' << py(ys[k]);
      first = false;
    }
    s << "\"/>\n";
    body_ += s.str();
  }

  void markers(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<bool>& filled) {
    std::ostringstream s;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if ((x_.log && !(xs[k] > 0)) || (y_.log && !(ys[k] > 0)) || !std::isfinite(ys[k])) continue;
      s << "  <circle cx=\"" << px(xs[k]) << "\" cy=\"" << py(ys[k]) << "\" r=\"3\" fill=\""
        << (filled.empty() || filled[k] ? "#1f4e9c" : "white") << "\" stroke=\"#1f4e9c\"/>\n";
    }
    body_ += s.str();
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ostringstream s;
    double y = kTop + 14;
    for (const auto& [label, color] : entries) {
      s << "  <line x1=\"" << kWidth - kRight - 190 << "\" y1=\"" << y - 4 << "\" x2=\"" << kWidth - kRight - 166
        << "\" y2=\"" << y - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "  <text x=\"" << kWidth - kRight - 160 << "\" y=\"" << y << "\" font-size=\"12\">" << label
        << "</text>\n";
      y += 16;
    }
    body_ += s.str();
  }

  std::string render() const {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title_
      << "</text>\n"
      << "  <rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
      << "\" height=\"" << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (const double t : x_.ticks()) {
      const double x = px(t);
      s << "  <line x1=\"" << x << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << x << "\" y2=\""
        << kHeight - kBottom + 5 << "\" stroke=\"black\"/>\n"
        << "  <text x=\"" << x << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << num(t) << "</text>\n";
    }
    for (const double t : y_.ticks()) {
      const double y = py(t);
      s << "  <line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n"
        << "  <text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << num(t)
        << "</text>\n";
    }
    s << "  <text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 18
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_.label << (x_.log ? " (log)" : "") << "</text>\n"
      << "  <text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << (kTop + kHeight - kBottom) / 2 << ")\">" << y_.label
      << (y_.log ? " (log)" : "") << "</text>\n"
      << body_ << "</svg>\n";
    return s.str();
  }

 private:
  double px(double v) const { return kLeft + x_.to_unit(v) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - y_.to_unit(v) * (kHeight - kTop - kBottom); }

  Axis x_, y_;
  std::string title_;
  std::string body_;
};

std::vector<double> linspace(double lo, double hi, int n, bool log) {
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) {
    const double t = double(k) / (n - 1);
    out[k] = log ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo);
  }
  return out;
}

std::string rate_curve(const std::filesystem::path& csv) {
  const auto file = csv.string();
  const auto t = read_csv(csv);
  const auto eps = t.numbers("epsilon", file);
  const auto gap = t.numbers("gap", file);
  if (eps.empty()) throw std::runtime_error(file + ": no rows to plot");
  const bool log_y = std::all_of(gap.begin(), gap.end(), [](double g) { return g > 0; });

  std::vector<double> fx, fy;
  const auto fit_path = csv.parent_path() / "fit.csv";
  if (std::filesystem::exists(fit_path)) {
    const auto f = read_csv(fit_path);
    const auto fp = fit_path.string();
    if (!f.rows.empty()) {
      const double a = f.numbers("a", fp)[0], b = f.numbers("b", fp)[0];
      fx = linspace(f.numbers("window_lo", fp)[0], f.numbers("window_hi", fp)[0], 64, true);
      for (const double e : fx) fy.push_back(a * e * std::log(1 / e) + b * e);
    }
  }
  std::vector<double> all_y = gap;
  all_y.insert(all_y.end(), fy.begin(), fy.end());
  Chart chart(fit_axis(eps, true, "epsilon"), fit_axis(all_y, log_y, "v_eps - v0"), "Entropic gap");
  chart.polyline(eps, gap, "data", "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
  chart.markers(eps, gap, {});
  std::vector<std::pair<std::string, std::string>> legend{{"v_eps - v0", "#1f4e9c"}};
  if (!fx.empty()) {
    chart.polyline(fx, fy, "fit", "stroke=\"#c0392b\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"");
    legend.emplace_back("a eps log(1/eps) + b eps", "#c0392b");
  }
  chart.legend(legend);
  return chart.render();
}

std::string entropy_profile(const std::filesystem::path& csv) {
  const auto file = csv.string();
  const auto t = read_csv(csv);
  const auto x = t.numbers("log_inv_delta", file);
  const auto H = t.numbers("H", file);
  const auto window = t.numbers("in_window", file);
  if (x.empty()) throw std::runtime_error(file + ": no rows to plot");
  std::vector<double> wx, wy;
  std::vector<bool> filled;
  for (std::size_t k = 0; k < x.size(); ++k) {
    filled.push_back(window[k] > 0);
    if (window[k] > 0) {
      wx.push_back(x[k]);
      wy.push_back(H[k]);
    }
  }
  Chart chart(fit_axis(x, false, "log(1/delta)"), fit_axis(H, false, "H_delta"), "Grid entropy profile");
  chart.polyline(x, H, "data", "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
  chart.markers(x, H, filled);
  std::vector<std::pair<std::string, std::string>> legend{{"H_delta", "#1f4e9c"}};
  if (wx.size() >= 2) {
    const auto fit = fit_line(wx, wy);
    const double lo = *std::min_element(wx.begin(), wx.end()), hi = *std::max_element(wx.begin(), wx.end());
    chart.polyline({lo, hi}, {fit.intercept + fit.slope * lo, fit.intercept + fit.slope * hi}, "fit",
                   "stroke=\"#c0392b\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"");
    legend.emplace_back("fit, slope " + num(fit.slope), "#c0392b");
    const double ref = std::max(0.0, std::round(fit.slope));
    double cx = 0, cy = 0;
    for (std::size_t k = 0; k < wx.size(); ++k) {
      cx += wx[k] / wx.size();
      cy += wy[k] / wy.size();
    }
    chart.polyline({lo, hi}, {cy + ref * (lo - cx), cy + ref * (hi - cx)}, "reference",
                   "stroke=\"#7f8c8d\" stroke-width=\"1\"");
    legend.emplace_back("reference, slope " + num(ref), "#7f8c8d");
  }
  chart.legend(legend);
  return chart.render();
}

std::string laplace_slope(const std::filesystem::path& csv) {
  const auto file = csv.string();
  const auto t = read_csv(csv);
  const auto eps = t.numbers("epsilon", file);
  const auto logI = t.numbers("log_integral", file);
  if (eps.size() < 2) throw std::runtime_error(file + ": need at least two rows to plot");
  std::vector<double> lx;
  for (const double e : eps) lx.push_back(std::log(e));
  const auto fit = fit_line(lx, logI);
  Chart chart(fit_axis(eps, true, "epsilon"), fit_axis(logI, false, "log I(eps)"), "Laplace integral");
  chart.polyline(eps, logI, "data", "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
  chart.markers(eps, logI, {});
  const double lo = *std::min_element(eps.begin(), eps.end()), hi = *std::max_element(eps.begin(), eps.end());
  chart.polyline({lo, hi}, {fit.intercept + fit.slope * std::log(lo), fit.intercept + fit.slope * std::log(hi)},
                 "fit", "stroke=\"#c0392b\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"");
  chart.legend({{"log I", "#1f4e9c"}, {"fit, slope " + num(fit.slope), "#c0392b"}});
  return chart.render();
}

}  // namespace

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "rate-curve") return PlotKind::RateCurve;
  if (name == "entropy-profile") return PlotKind::EntropyProfile;
  if (name == "laplace-slope") return PlotKind::LaplaceSlope;
  throw std::invalid_argument("unknown plot kind '" + name + "' (rate-curve, entropy-profile, laplace-slope)");
}

std::string to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::RateCurve: return "rate-curve";
    case PlotKind::EntropyProfile: return "entropy-profile";
    case PlotKind::LaplaceSlope: return "laplace-slope";
  }
  return "?";
}

std::filesystem::path emit_plot(const std::filesystem::path& csv, PlotKind kind,
                                const std::optional<std::filesystem::path>& out) {
  std::string svg;
  switch (kind) {
    case PlotKind::RateCurve: svg = rate_curve(csv); break;
    case PlotKind::EntropyProfile: svg = entropy_profile(csv); break;
    case PlotKind::LaplaceSlope: svg = laplace_slope(csv); break;
  }
  const auto path = out.value_or(csv.parent_path() / (to_string(kind) + ".svg"));
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << svg;
  return path;
}

}  // namespace eotr::app
