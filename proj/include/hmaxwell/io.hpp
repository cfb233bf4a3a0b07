#pragma once

// Report emission: CSV (RFC 4180), JSON dumps and self-contained SVG plots.
// Requires nlohmann/json and Boost.CRC on the include path.

#include "hmaxwell/cluster.hpp"
#include "hmaxwell/fem.hpp"
#include "hmaxwell/hmatrix.hpp"
#include "hmaxwell/inverse_lab.hpp"
#include "hmaxwell/mesh.hpp"

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmx::io {

using json = nlohmann::ordered_json;

/// Shortest round-trippable decimal form.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  return line + "\r\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::uint32_t crc32_of(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

inline std::string crc32_hex(const std::filesystem::path& path) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(crc32_of(read_text(path))));
  return buf;
}

inline json point_json(const Point3& p) { return json::array({p(0), p(1), p(2)}); }

inline json box_json(const Box3& b) { return {{"lo", point_json(b.lo)}, {"hi", point_json(b.hi)}}; }

inline json mesh_json(const Mesh& mesh) {
  json j;
  j["n"] = mesh.subdivisions();
  j["L"] = mesh.side();
  j["h"] = mesh.h();
  json verts = json::array(), tets = json::array(), edges = json::array(), bnd = json::array();
  for (const auto& v : mesh.vertices()) verts.push_back(point_json(v));
  for (const auto& t : mesh.tets()) tets.push_back(t);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    edges.push_back(mesh.edges()[e]);
    if (mesh.boundary_edge()[e]) bnd.push_back(e);
  }
  j["vertices"] = std::move(verts);
  j["tets"] = std::move(tets);
  j["edges"] = std::move(edges);
  j["boundary_edges"] = std::move(bnd);
  return j;
}

/// Coordinate format, one "row col re im" line per stored entry, 0-based, column-major order.
template <class Scalar>
std::string matrix_coo(const SparseMatrixT<Scalar>& A) {
  std::string out;
  for (int k = 0; k < A.outerSize(); ++k)
    for (typename SparseMatrixT<Scalar>::InnerIterator it(A, k); it; ++it) {
      const std::complex<double> v(it.value());
      out += std::to_string(it.row()) + ' ' + std::to_string(it.col()) + ' ' + fmt(v.real()) + ' ' + fmt(v.imag()) + '\n';
    }
  return out;
}

inline json partition_json(const ClusterTree& tree, const BlockPartition& p) {
  json clusters = json::array();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& c = tree[static_cast<int>(i)];
    clusters.push_back({{"id", i},
                        {"level", c.level},
                        {"children", c.is_leaf() ? json::array() : json(c.children)},
                        {"indices", c.indices},
                        {"box", box_json(c.box)}});
  }
  json far = json::array(), near = json::array();
  for (const auto& [t, s] : p.far) far.push_back({t, s});
  for (const auto& [t, s] : p.near) near.push_back({t, s});
  return {{"eta", p.eta}, {"n_leaf", tree.n_leaf()}, {"depth", tree.depth()}, {"clusters", std::move(clusters)},
          {"far", std::move(far)}, {"near", std::move(near)}};
}

template <class Scalar>
json hmatrix_manifest(const HMatrix<Scalar>& H, const std::string& partition_ref) {
  const auto& p = H.partition();
  json far = json::array();
  for (std::size_t b = 0; b < p.far.size(); ++b)
    far.push_back({{"tau", p.far[b].first},
                   {"sigma", p.far[b].second},
                   {"rank", H.far_blocks()[b].rank()},
                   {"truncation_error", H.far_blocks()[b].truncation_error}});
  json near = json::array();
  for (const auto& [t, s] : p.near) near.push_back({{"tau", t}, {"sigma", s}});
  const auto st = storage_stats(H);
  return {{"partition", partition_ref},
          {"far", std::move(far)},
          {"near", std::move(near)},
          {"scalars_far", st.scalars_far},
          {"scalars_near", st.scalars_near},
          {"bound_value", st.bound_value}};
}

inline std::string sweep_csv(const SweepResult& s) {
  std::string out = csv_line({"r", "abs_err", "rel_err", "max_block_sigma", "bound_value", "scalars", "converged"});
  for (const auto& r : s.rows)
    out += csv_line({std::to_string(r.rank), fmt(r.abs_err), fmt(r.rel_err), fmt(r.max_block_sigma), fmt(r.bound_value),
                     std::to_string(r.scalars), r.converged ? "1" : "0"});
  return out;
}

inline json fit_json(const DecayFit& f) {
  json j{{"fitted", f.fitted}, {"points", f.points}};
  if (f.fitted) {
    j["exponential"] = {{"log_C", f.log_c_exp}, {"q", f.q}, {"rms", f.rms_exp}};
    j["root_exponential"] = {{"log_C", f.log_c_root}, {"b", f.b}, {"rms", f.rms_root}};
  }
  if (!f.notice.empty()) j["notice"] = f.notice;
  return j;
}

/// Line chart with linear axes. Series with fewer than one finite point are skipped.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool markers = true;
  bool dashed = false;
};

inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                            const std::vector<PlotSeries>& series) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 55;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  const auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
  const auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };
  char buf[256];
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << esc(title) << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<path d=\"M%.2f %.2f L%.2f %.2f L%.2f %.2f\" fill=\"none\" stroke=\"black\"/>\n", ml, mt, ml, H - mb,
                W - mr, H - mb);
  o << buf;
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">%.3g</text>\n",
                  px(xv), H - mb + 16, xv);
    o << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">%.3g</text>\n",
                  ml - 6, py(yv) + 4, yv);
    o << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#dddddd\"/>\n", ml,
                  py(yv), W - mr, py(yv));
    o << buf;
  }
  o << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 14
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << esc(xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
    << "transform=\"rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << esc(ylabel) << "</text>\n";
  int legend = 0;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", pts.empty() ? "" : " ", px(s.x[i]), py(s.y[i]));
      pts += buf;
    }
    if (pts.empty()) continue;
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << pts << "\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(s.x[i]), py(s.y[i]),
                      s.color.c_str());
        o << buf;
      }
    const double ly = mt + 14 + 16 * legend++;
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\"/>\n", W - mr - 170,
                  ly - 4, W - mr - 150, ly - 4, s.color.c_str());
    o << buf << "<text x=\"" << W - mr - 145 << "\" y=\"" << ly
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << esc(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Sweep plot: measured log10 relative error and both models fitted to it, on a fine rank grid.
inline std::string sweep_svg(const SweepResult& s, const DecayFit& fit) {
  PlotSeries meas{"measured", {}, {}, "#1f77b4", true, false};
  for (const auto& r : s.rows) {
    meas.x.push_back(r.rank);
    meas.y.push_back(r.rel_err > 0 ? std::log10(r.rel_err) : std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<PlotSeries> all{meas};
  if (fit.fitted && !s.rows.empty()) {
    PlotSeries e{"exponential fit", {}, {}, "#d62728", false, true};
    PlotSeries re{"root-exponential fit", {}, {}, "#2ca02c", false, true};
    const double lo = s.rows.front().rank, hi = s.rows.back().rank;
    for (int k = 0; k <= 100; ++k) {
      const double r = lo + (hi - lo) * k / 100.0;
      e.x.push_back(r);
      e.y.push_back((fit.log_c_exp + r * std::log(fit.q)) / std::log(10.0));
      re.x.push_back(r);
      re.y.push_back((fit.log_c_root - fit.b * root_exponential_feature(r)) / std::log(10.0));
    }
    all.push_back(std::move(e));
    all.push_back(std::move(re));
  }
  return svg_plot("H-matrix approximation of the inverse", "rank r", "log10 relative spectral error", all);
}

}  // namespace hmx::io
