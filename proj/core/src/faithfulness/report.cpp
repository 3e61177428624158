#include "proxylab/faithfulness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace proxylab::faithfulness {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return fmt("%.6g", v); }
std::string exact(double v) { return fmt("%.17g", v); }

const std::string& checked_field(const std::string& s) {
  if (s.find_first_of(",\n\"") != std::string::npos) {
    throw std::invalid_argument("CSV field '" + s + "' contains a separator");
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"mean_jsd",          "mean_jsd_eval",
                                              "same_prediction",   "same_prediction_full",
                                              "accuracy_original", "accuracy_simplified"};
  return names;
}

std::size_t metric_n(const FaithfulnessRecord& r, const std::string& m) {
  if (m == "mean_jsd") return r.jsd_rows;
  if (m == "mean_jsd_eval") return r.jsd_eval_rows;
  if (m == "same_prediction") return r.same_prediction.total;
  if (m == "same_prediction_full") return r.same_prediction_full.total;
  if (m == "accuracy_original") return r.accuracy_original.total;
  return r.accuracy_simplified.total;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

/// Comment-safe text: "--" may not appear inside an XML comment.
std::string comment_safe(std::string s) {
  for (std::size_t i = s.find("--"); i != std::string::npos; i = s.find("--", i)) s[i + 1] = '_';
  return s;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

constexpr double kWidth = 640, kHeight = 400, kLeft = 64, kRight = 160, kTop = 40, kBottom = 56;

struct Canvas {
  std::ostringstream body;
  std::ostringstream data;
  double width = kWidth, height = kHeight;

  void text(double x, double y, const std::string& s, const char* anchor = "middle",
            int size = 12, const char* extra = "") {
    body << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
         << "\" text-anchor=\"" << anchor << "\"" << extra << ">" << escape(s) << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "#000") {
    body << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
         << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    body << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
         << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  std::string str(const std::string& title) const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height)
        << "\" font-family=\"sans-serif\">\n";
    out << "<!-- data\n" << comment_safe(data.str()) << "-->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    out << "<text x=\"" << num(width / 2) << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">"
        << escape(title) << "</text>\n";
    out << body.str() << "</svg>\n";
    return out.str();
  }
};

/// Blue ramp from white (lo) to dark blue (hi).
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto c = [&](double a, double b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(247, 8), c(251, 48), c(255, 107));
  return buf;
}

void y_axis(Canvas& cv, double lo, double hi, double x0, double y0, double h) {
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = y0 + h - h * i / 4.0;
    cv.line(x0 - 4, y, x0, y);
    cv.text(x0 - 6, y + 4, num(v), "end", 10);
  }
}

}  // namespace

std::string format_value(std::optional<double> v) { return v ? fmt("%.10g", *v) : "NA"; }

std::optional<double> metric_value(const FaithfulnessRecord& r, const std::string& m) {
  if (m == "mean_jsd") return r.mean_jsd();
  if (m == "mean_jsd_eval") return r.mean_jsd_eval();
  if (m == "same_prediction") return r.same_prediction.value();
  if (m == "same_prediction_full") return r.same_prediction_full.value();
  if (m == "accuracy_original") return r.accuracy_original.value();
  if (m == "accuracy_simplified") return r.accuracy_simplified.value();
  throw std::invalid_argument("unknown metric '" + m + "'");
}

void write_records_long(std::ostream& out, const std::vector<FaithfulnessRecord>& records) {
  out << "split,simplifier,strength,metric,value,n\n";
  for (const auto& r : records) {
    for (const auto& m : metric_names()) {
      out << checked_field(r.key.split) << ',' << checked_field(r.key.simplifier) << ','
          << r.key.strength << ',' << m << ',' << format_value(metric_value(r, m)) << ','
          << metric_n(r, m) << '\n';
    }
  }
}

void write_records_wide(std::ostream& out, const std::vector<FaithfulnessRecord>& records) {
  out << "split,simplifier,strength,layer,head,correct_only,jsd_sum,jsd_rows,jsd_eval_sum,"
         "jsd_eval_rows,same_hits,same_total,same_full_hits,same_full_total,acc_original_hits,"
         "acc_original_total,acc_simplified_hits,acc_simplified_total,n_eval_positions\n";
  for (const auto& r : records) {
    out << checked_field(r.key.split) << ',' << checked_field(r.key.simplifier) << ','
        << r.key.strength << ',' << r.key.layer << ',' << r.key.head << ','
        << (r.original_correct_only ? 1 : 0) << ',' << exact(r.jsd_sum) << ',' << r.jsd_rows
        << ',' << exact(r.jsd_eval_sum) << ',' << r.jsd_eval_rows << ','
        << r.same_prediction.hits << ',' << r.same_prediction.total << ','
        << r.same_prediction_full.hits << ',' << r.same_prediction_full.total << ','
        << r.accuracy_original.hits << ',' << r.accuracy_original.total << ','
        << r.accuracy_simplified.hits << ',' << r.accuracy_simplified.total << ','
        << r.n_eval_positions << '\n';
  }
}

std::vector<FaithfulnessRecord> read_records_wide(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("split,simplifier,strength,layer,head", 0) != 0) {
    throw std::runtime_error(path.string() + ": not a wide records CSV");
  }
  std::vector<FaithfulnessRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 19) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 19 fields");
    }
    try {
      FaithfulnessRecord r;
      const auto u = [&](std::size_t i) { return static_cast<std::size_t>(std::stoull(f[i])); };
      r.key = {f[0], f[1], std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4])};
      r.original_correct_only = f[5] == "1";
      r.jsd_sum = std::stod(f[6]);
      r.jsd_rows = u(7);
      r.jsd_eval_sum = std::stod(f[8]);
      r.jsd_eval_rows = u(9);
      r.same_prediction = {u(10), u(11)};
      r.same_prediction_full = {u(12), u(13)};
      r.accuracy_original = {u(14), u(15)};
      r.accuracy_simplified = {u(16), u(17)};
      r.n_eval_positions = u(18);
      out.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_grid_csv(std::ostream& out, const DepthErrorGrid& grid) {
  out << "query_depth,max_depth,hits,total,accuracy\n";
  for (const auto& [k, f] : grid.cells) {
    out << k.first << ',' << k.second << ',' << f.hits << ',' << f.total << ','
        << format_value(f.value()) << '\n';
  }
}

void write_profile_csv(std::ostream& out, const AttentionErrorProfile& p) {
  out << "kind,key,count\n";
  for (const auto& [k, c] : p.depth) out << "depth," << k.first << ':' << k.second << ',' << c << '\n';
  for (const auto& [k, c] : p.offset) out << "offset," << k << ',' << c << '\n';
}

void write_projection_csv(std::ostream& out, const ProjectionTable& t) {
  out << "sequence,position,role,token,token_depth,prefix_depth,bracket_type,norm";
  for (std::size_t c : t.components) out << ",c" << c;
  out << '\n';
  for (const auto& p : t.points) {
    out << p.sequence << ',' << p.position << ',' << to_string(p.role) << ',' << p.token << ','
        << p.token_depth << ',' << p.prefix_depth << ',' << p.bracket_type << ','
        << fmt("%.9g", p.norm);
    for (double c : p.coords) out << ',' << fmt("%.9g", c);
    out << '\n';
  }
}

void write_cluster_csv(std::ostream& out, const ClusterProfile& p) {
  out << "role,cluster,depth,count,nearest_key\n";
  for (std::size_t q = 0; q < p.query_depths.size(); ++q) {
    for (std::size_t d = 0; d < p.query_depths[q].size(); ++d) {
      out << "query," << q << ',' << d << ',' << p.query_depths[q][d] << ',' << p.nearest_key[q] << '\n';
    }
  }
  for (std::size_t k = 0; k < p.key_depths.size(); ++k) {
    for (std::size_t d = 0; d < p.key_depths[k].size(); ++d) {
      out << "key," << k << ',' << d << ',' << p.key_depths[k][d] << ",\n";
    }
  }
}

namespace svg {

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  Canvas cv;
  cv.data << "series,x,y\n";
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      cv.data << s.name << ',' << num(x) << ',' << num(y) << '\n';
      if (first) {
        xmin = xmax = x;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double w = kWidth - kLeft - kRight, h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * w; };
  const auto py = [&](double y) { return kTop + h - (y - ymin) / (ymax - ymin) * h; };
  cv.line(kLeft, kTop + h, kLeft + w, kTop + h);
  cv.line(kLeft, kTop, kLeft, kTop + h);
  y_axis(cv, ymin, ymax, kLeft, kTop, h);
  std::set<double> xs;
  for (const auto& s : series) {
    for (const auto& p : s.points) xs.insert(p.first);
  }
  for (double x : xs) {
    cv.line(px(x), kTop + h, px(x), kTop + h + 4);
    cv.text(px(x), kTop + h + 16, num(x), "middle", 10);
  }
  cv.text(kLeft + w / 2, kHeight - 16, x_label);
  cv.text(16, kTop + h / 2, y_label, "middle", 12,
          (" transform=\"rotate(-90 16 " + num(kTop + h / 2) + ")\"").c_str());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end());
    cv.body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < pts.size(); ++j) {
      cv.body << (j ? " " : "") << num(px(pts[j].first)) << ',' << num(py(pts[j].second));
    }
    cv.body << "\"/>\n";
    for (const auto& [x, y] : pts) {
      cv.body << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\""
              << color << "\"/>\n";
    }
    const double ly = kTop + 12 + 18.0 * static_cast<double>(i);
    cv.rect(kWidth - kRight + 16, ly - 9, 12, 12, color);
    cv.text(kWidth - kRight + 34, ly + 1, series[i].name, "start", 11);
  }
  return cv.str(title);
}

std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels,
                    const std::vector<std::optional<double>>& cells, double lo, double hi) {
  if (cells.size() != row_labels.size() * col_labels.size()) {
    throw std::invalid_argument("heatmap: cell count does not match labels");
  }
  Canvas cv;
  cv.data << "row,col,value\n";
  const double w = kWidth - kLeft - kRight, h = kHeight - kTop - kBottom;
  const double cw = w / std::max<std::size_t>(col_labels.size(), 1);
  const double ch = h / std::max<std::size_t>(row_labels.size(), 1);
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const auto& v = cells[r * col_labels.size() + c];
      if (!v) continue;
      cv.data << row_labels[r] << ',' << col_labels[c] << ',' << num(*v) << '\n';
      const double x = kLeft + cw * static_cast<double>(c), y = kTop + ch * static_cast<double>(r);
      cv.rect(x, y, cw, ch, ramp((*v - lo) / (hi - lo)));
      if (cw >= 24 && ch >= 12) {
        cv.text(x + cw / 2, y + ch / 2 + 4, fmt("%.2f", *v), "middle", 9,
                (*v - lo) / (hi - lo) > 0.6 ? " fill=\"#fff\"" : "");
      }
    }
    cv.text(kLeft - 6, kTop + ch * (static_cast<double>(r) + 0.5) + 4, row_labels[r], "end", 10);
  }
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    cv.text(kLeft + cw * (static_cast<double>(c) + 0.5), kTop + h + 14, col_labels[c], "middle", 10);
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = kTop + h - h * i / 4.0;
    cv.rect(kWidth - kRight + 20, y - h / 4.0, 16, i == 0 ? 0 : h / 4.0, ramp((i - 0.5) / 4.0));
    cv.text(kWidth - kRight + 42, y + 4, num(lo + (hi - lo) * i / 4.0), "start", 10);
  }
  return cv.str(title);
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  if (labels.size() != values.size()) throw std::invalid_argument("bar_chart: size mismatch");
  Canvas cv;
  cv.data << "label,value\n";
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    cv.data << labels[i] << ',' << num(values[i]) << '\n';
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  if (hi == lo) hi = lo + 1;
  const double w = kWidth - kLeft - 40, h = kHeight - kTop - kBottom;
  const auto py = [&](double y) { return kTop + h - (y - lo) / (hi - lo) * h; };
  y_axis(cv, lo, hi, kLeft, kTop, h);
  cv.line(kLeft, py(0), kLeft + w, py(0));
  const double bw = w / std::max<std::size_t>(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + bw * static_cast<double>(i);
    const double top = std::min(py(values[i]), py(0));
    cv.rect(x + bw * 0.15, top, bw * 0.7, std::abs(py(values[i]) - py(0)), kPalette[0]);
    cv.text(x + bw / 2, kTop + h + 14, labels[i], "middle", 10);
  }
  return cv.str(title);
}

std::string cluster_profile(const std::string& title, const ClusterProfile& p) {
  Canvas cv;
  cv.data << "query_cluster,nearest_key,role,depth,count\n";
  const std::size_t n = p.query_depths.size();
  const std::size_t cols = 4, rows = (n + cols - 1) / cols;
  std::size_t depths = 1;
  for (const auto& hq : p.query_depths) depths = std::max(depths, hq.size());
  for (const auto& hk : p.key_depths) depths = std::max(depths, hk.size());
  const double pw = 150, ph = 110;
  cv.width = 20 + pw * cols;
  cv.height = 50 + ph * static_cast<double>(std::max<std::size_t>(rows, 1));
  for (std::size_t q = 0; q < n; ++q) {
    const auto& hq = p.query_depths[q];
    const auto& hk = p.key_depths[p.nearest_key[q]];
    const double total_q = std::max<double>(1, static_cast<double>(std::accumulate(hq.begin(), hq.end(), std::size_t{0})));
    const double total_k = std::max<double>(1, static_cast<double>(std::accumulate(hk.begin(), hk.end(), std::size_t{0})));
    const double x0 = 20 + pw * static_cast<double>(q % cols), y0 = 40 + ph * static_cast<double>(q / cols);
    cv.text(x0 + pw / 2 - 10, y0 + 12, "Q" + std::to_string(q) + " / K" + std::to_string(p.nearest_key[q]),
            "middle", 10);
    const double bw = (pw - 30) / static_cast<double>(depths), base = y0 + ph - 20, hmax = ph - 40;
    for (std::size_t d = 0; d < depths; ++d) {
      const double fq = d < hq.size() ? static_cast<double>(hq[d]) / total_q : 0.0;
      const double fk = d < hk.size() ? static_cast<double>(hk[d]) / total_k : 0.0;
      if (d < hq.size() && hq[d]) cv.data << q << ',' << p.nearest_key[q] << ",query," << d << ',' << hq[d] << '\n';
      if (d < hk.size() && hk[d]) cv.data << q << ',' << p.nearest_key[q] << ",key," << d << ',' << hk[d] << '\n';
      const double x = x0 + bw * static_cast<double>(d);
      cv.rect(x, base - fq * hmax, bw / 2, fq * hmax, kPalette[0]);
      cv.rect(x + bw / 2, base - fk * hmax, bw / 2, fk * hmax, kPalette[1]);
    }
    cv.line(x0, base, x0 + pw - 30, base);
    cv.text(x0, base + 12, "0", "start", 8);
    cv.text(x0 + pw - 30, base + 12, std::to_string(depths - 1), "end", 8);
  }
  return cv.str(title + " (blue: query cluster depths, red: nearest key cluster)");
}

}  // namespace svg

std::string sweep_chart(const std::vector<FaithfulnessRecord>& records, const std::string& metric) {
  std::map<std::string, svg::Series> by_split;
  std::vector<std::string> order;
  std::string kind;
  for (const auto& r : records) {
    const auto v = metric_value(r, metric);
    if (!v) continue;
    if (!by_split.count(r.key.split)) {
      order.push_back(r.key.split);
      by_split[r.key.split].name = r.key.split;
    }
    by_split[r.key.split].points.emplace_back(r.key.strength, *v);
    kind = r.key.simplifier;
  }
  std::vector<svg::Series> series;
  for (const auto& s : order) series.push_back(by_split[s]);
  const std::string x = kind == "kmeans" ? "clusters" : "rank";
  return svg::line_chart(metric + " vs " + x + (kind.empty() ? "" : " (" + kind + ")"), x, metric,
                         series);
}

std::string grid_chart(const std::string& title, const DepthErrorGrid& grid) {
  std::set<int> qs, ms;
  for (const auto& [k, _] : grid.cells) {
    qs.insert(k.first);
    ms.insert(k.second);
  }
  std::vector<std::string> rows, cols;
  std::vector<std::optional<double>> cells;
  for (int q : qs) rows.push_back(std::to_string(q));
  for (int m : ms) cols.push_back(std::to_string(m));
  for (int q : qs) {
    for (int m : ms) cells.push_back(grid.accuracy(q, m));
  }
  return svg::heatmap(title + " (rows: query depth, columns: max depth)", rows, cols, cells);
}

}  // namespace proxylab::faithfulness
