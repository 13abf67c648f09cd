// Copyright 2026 The persona-steer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "persona/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "persona/errors.hpp"

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;

PersonaSpace fit_persona_space(const DirectionLibrary& lib) {
  if (lib.size() < 2) throw StateError("persona-space analysis needs at least two traits");
  PersonaSpace space;
  space.names = lib.names();
  space.standardization = standardize(lib.raw_matrix());
  const auto& z = space.standardization.z;
  space.pca = pca_fit(z, std::min(z.rows() - 1, z.cols()));
  return space;
}

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t require_seed(const json& params, std::string_view kind) {
  if (!params.contains("seed") || !params["seed"].is_number_integer() ||
      params["seed"].get<std::int64_t>() < 0) {
    throw ConfigError(std::string(kind) + " analysis requires a non-negative integer 'seed'");
  }
  return params["seed"].get<std::uint64_t>();
}

template <typename T>
T param(const json& params, const char* key, T fallback) {
  try {
    return params.value(key, fallback);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parameter '") + key + "': " + e.what());
  }
}

json coords_json(const EmbeddingLayout& layout, const std::vector<std::string>& names) {
  json points = json::array();
  for (std::size_t i = 0; i < layout.coords.rows(); ++i) {
    points.push_back({{"trait", names[layout.rows[i]]}, {"coords", layout.coords.row_vector(i)}});
  }
  return points;
}

TsneParams tsne_params(const json& params, std::uint64_t seed) {
  TsneParams t;
  t.seed = seed;
  t.perplexity = param(params, "perplexity", t.perplexity);
  t.iterations = param(params, "iterations", t.iterations);
  return t;
}

json tsne_params_json(const TsneParams& t) {
  return {{"perplexity", t.perplexity},
          {"seed", t.seed},
          {"iterations", t.iterations},
          {"learning_rate", t.learning_rate},
          {"early_exaggeration", t.early_exaggeration},
          {"exaggeration_iterations", t.exaggeration_iterations},
          {"initial_momentum", t.initial_momentum},
          {"final_momentum", t.final_momentum},
          {"momentum_switch_iteration", t.momentum_switch_iteration}};
}

json run_pca(const PersonaSpace& space, const json& params) {
  const auto& z = space.standardization.z;
  const std::size_t kmax = std::min(z.rows() - 1, z.cols());
  const std::size_t k = param(params, "k", kmax);
  const PcaModel pca = pca_fit(z, k);
  json curve = json::array();
  for (const auto& p : pca_error_curve(z)) {
    curve.push_back({{"k", p.k}, {"relative_error", p.relative_error}});
  }
  const EmbeddingLayout layout = pca_layout(z, 3);
  return {{"kind", "pca"},
          {"params", {{"k", k}}},
          {"explained_variance", pca.explained_variance},
          {"explained_variance_ratio", pca.explained_variance_ratio()},
          {"error_curve", curve},
          {"layout", {{"method", "pca3"}, {"points", coords_json(layout, space.names)}}}};
}

json run_kmeans(const PersonaSpace& space, const json& params) {
  const auto& z = space.standardization.z;
  const std::uint64_t seed = require_seed(params, "kmeans");
  const std::size_t k = param(params, "k", std::min<std::size_t>(20, z.rows()));
  const std::size_t restarts = param(params, "restarts", std::size_t{16});
  const ClusterModel m = kmeans(z, k, seed, restarts);
  json clusters = json::array();
  for (std::size_t c = 0; c < m.k; ++c) {
    json members = json::array();
    for (std::size_t r = 0; r < m.assignments.size(); ++r) {
      if (m.assignments[r] == static_cast<int>(c)) members.push_back(space.names[r]);
    }
    clusters.push_back({{"id", c}, {"members", members}});
  }
  json assignments = json::array();
  for (std::size_t r = 0; r < m.assignments.size(); ++r) {
    assignments.push_back({{"trait", space.names[r]}, {"cluster", m.assignments[r]}});
  }
  return {{"kind", "kmeans"},
          {"params", {{"k", k}, {"seed", seed}, {"restarts", restarts}}},
          {"objective", m.objective},
          {"iterations", m.iterations},
          {"converged", m.converged},
          {"objective_trace", m.objective_trace},
          {"clusters", clusters},
          {"assignments", assignments}};
}

json run_tsne(const PersonaSpace& space, const json& params) {
  const std::uint64_t seed = require_seed(params, "tsne");
  const TsneParams t = tsne_params(params, seed);
  const auto& z = space.standardization.z;
  std::vector<std::size_t> rows(z.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  json out_params = tsne_params_json(t);
  if (params.contains("sample")) {
    const auto count = param(params, "sample", z.rows());
    rows = subsample_rows(z.rows(), count, seed);
    out_params["sample"] = count;
  }
  EmbeddingLayout layout = tsne(select_rows(z, rows), t);
  layout.rows = rows;
  return {{"kind", "tsne"},
          {"params", out_params},
          {"final_cost", layout.final_cost},
          {"layout", {{"method", "tsne2"}, {"points", coords_json(layout, space.names)}}}};
}

json run_greedy(const PersonaSpace& space, const json& params) {
  const auto& z = space.standardization.z;
  const std::uint64_t seed = require_seed(params, "greedy");
  const std::size_t m = param(params, "m", z.rows());
  const std::size_t trials = param(params, "trials", std::size_t{50});
  const GreedyReport g = greedy_basis_selection(z, m);
  const BaselineReport b = random_baseline(z, m, trials, seed);
  json steps = json::array();
  for (std::size_t i = 0; i < g.ranked.size(); ++i) {
    steps.push_back({{"size", i + 1},
                     {"trait", space.names[g.ranked[i]]},
                     {"error", g.errors[i]},
                     {"baseline_mean", b.per_size[i].mean},
                     {"baseline_min", b.per_size[i].min},
                     {"baseline_max", b.per_size[i].max}});
  }
  return {{"kind", "greedy"},
          {"params", {{"m", m}, {"trials", trials}, {"seed", seed}}},
          {"steps", steps}};
}

json run_ranking(const PersonaSpace& space, const json& params) {
  const std::size_t top_n = param(params, "top_n", std::size_t{10});
  const std::size_t n_components =
      std::min(param(params, "components", std::size_t{10}), space.pca.k());
  const auto ranks = trait_pc_ranking(space.standardization.z, space.pca, top_n);
  json comps = json::array();
  for (std::size_t k = 0; k < n_components; ++k) {
    const auto& r = ranks[k];
    auto list = [&](const std::vector<RankedTrait>& v) {
      json a = json::array();
      for (const auto& t : v) a.push_back({{"trait", space.names[t.index]}, {"distance", t.distance}});
      return a;
    };
    json distances = json::array();
    std::vector<double> by_trait(space.names.size());
    for (const auto& t : r.ascending) by_trait[t.index] = t.distance;
    comps.push_back({{"component", k},
                     {"top", list(r.top)},
                     {"bottom", list(r.bottom)},
                     {"combined_distance", r.combined_distance},
                     {"distances", by_trait}});
  }
  return {{"kind", "ranking"},
          {"params", {{"top_n", top_n}, {"components", n_components}}},
          {"traits", space.names},
          {"components", comps}};
}

json run_proximity(const PersonaSpace& space, const DirectionLibrary& lib, const json& params) {
  ProximityParams p;
  p.method = layout_method_from_string(param(params, "method", std::string("pca3")));
  p.top_n = param(params, "top_n", p.top_n);
  json out_params = {{"method", to_string(p.method)}, {"top_n", p.top_n}};

  std::vector<std::size_t> members;
  if (params.contains("members")) {
    for (const auto& name : params["members"]) {
      const auto idx = lib.index_of(name.get<std::string>());
      if (!idx) throw MissingDataError(name.get<std::string>());
      members.push_back(*idx);
    }
    out_params["members"] = params["members"];
  } else if (params.contains("cluster_of")) {
    const std::string anchor = params["cluster_of"].get<std::string>();
    const auto idx = lib.index_of(anchor);
    if (!idx) throw MissingDataError(anchor);
    const std::uint64_t seed = require_seed(params, "proximity");
    const std::size_t k = param(params, "k", std::min<std::size_t>(20, lib.size()));
    const std::size_t restarts = param(params, "restarts", std::size_t{16});
    const ClusterModel m = kmeans(space.standardization.z, k, seed, restarts);
    for (std::size_t r = 0; r < m.assignments.size(); ++r) {
      if (m.assignments[r] == m.assignments[*idx]) members.push_back(r);
    }
    out_params.update({{"cluster_of", anchor}, {"k", k}, {"restarts", restarts}});
  } else {
    throw ConfigError("proximity needs 'members' or 'cluster_of'");
  }
  if (p.method == LayoutMethod::kTsne2) {
    p.tsne = tsne_params(params, require_seed(params, "proximity"));
    out_params["tsne"] = tsne_params_json(p.tsne);
  }
  if (params.contains("seed")) out_params["seed"] = params["seed"];

  const ProximityResult res = cluster_proximity(space.standardization.z, members, p);
  json member_names = json::array();
  for (std::size_t m : members) member_names.push_back(space.names[m]);
  json ranked = json::array();
  for (std::size_t i = 0; i < res.ranked.size(); ++i) {
    ranked.push_back({{"rank", i + 1},
                      {"trait", space.names[res.ranked[i].index]},
                      {"distance", res.ranked[i].distance}});
  }
  return {{"kind", "proximity"},
          {"params", out_params},
          {"cluster", member_names},
          {"centroid", res.centroid},
          {"ranked", ranked},
          {"layout", {{"method", to_string(res.layout.method)},
                      {"points", coords_json(res.layout, space.names)}}}};
}

}  // namespace

bool is_analysis_kind(std::string_view kind) {
  return kind == "pca" || kind == "kmeans" || kind == "tsne" || kind == "greedy" ||
         kind == "ranking" || kind == "proximity";
}

json run_analysis(std::string_view kind, const DirectionLibrary& lib, const json& params) {
  if (!is_analysis_kind(kind)) throw ConfigError("unknown analysis '" + std::string(kind) + "'");
  const json p = params.is_null() ? json::object() : params;
  if (!p.is_object()) throw ConfigError("analysis parameters must be a JSON object");
  const PersonaSpace space = fit_persona_space(lib);
  json report;
  if (kind == "pca") report = run_pca(space, p);
  else if (kind == "kmeans") report = run_kmeans(space, p);
  else if (kind == "tsne") report = run_tsne(space, p);
  else if (kind == "greedy") report = run_greedy(space, p);
  else if (kind == "ranking") report = run_ranking(space, p);
  else report = run_proximity(space, lib, p);
  report["library_hash"] = hash_hex(lib.content_hash());
  report["n_traits"] = lib.size();
  report["d_model"] = lib.d_model();
  return report;
}

std::string report_text(const json& report) { return report.dump(2) + "\n"; }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double x) {
  // Shortest round-trip form, identical to the JSON rendering.
  return json(x).dump();
}

}  // namespace

std::string report_csv(std::string_view kind, const json& report) {
  std::ostringstream out;
  if (kind == "pca" || kind == "tsne") {
    const auto& points = report.at("layout").at("points");
    const std::size_t dims = points.empty() ? 0 : points[0]["coords"].size();
    out << "trait";
    for (std::size_t i = 0; i < dims; ++i) {
      out << (kind == "pca" ? ",pc" : ",x") << (i + 1);
    }
    out << "\n";
    for (const auto& p : points) {
      out << csv_field(p["trait"].get<std::string>());
      for (const auto& c : p["coords"]) out << "," << num(c.get<double>());
      out << "\n";
    }
  } else if (kind == "kmeans") {
    out << "trait,cluster\n";
    for (const auto& a : report.at("assignments")) {
      out << csv_field(a["trait"].get<std::string>()) << "," << a["cluster"].get<int>() << "\n";
    }
  } else if (kind == "greedy") {
    out << "size,trait,error,baseline_mean,baseline_min,baseline_max\n";
    for (const auto& s : report.at("steps")) {
      out << s["size"].get<std::size_t>() << "," << csv_field(s["trait"].get<std::string>()) << ","
          << num(s["error"]) << "," << num(s["baseline_mean"]) << "," << num(s["baseline_min"])
          << "," << num(s["baseline_max"]) << "\n";
    }
  } else if (kind == "ranking") {
    const auto& comps = report.at("components");
    out << "trait";
    for (std::size_t k = 0; k < comps.size(); ++k) out << ",pc" << (k + 1) << "_distance";
    out << "\n";
    const auto& traits = report.at("traits");
    for (std::size_t t = 0; t < traits.size(); ++t) {
      out << csv_field(traits[t].get<std::string>());
      for (const auto& c : comps) out << "," << num(c["distances"][t].get<double>());
      out << "\n";
    }
  } else if (kind == "proximity") {
    out << "rank,trait,distance\n";
    for (const auto& r : report.at("ranked")) {
      out << r["rank"].get<std::size_t>() << "," << csv_field(r["trait"].get<std::string>()) << ","
          << num(r["distance"]) << "\n";
    }
  }
  return out.str();
}

std::string report_svg(std::string_view kind, const json& report) {
  if (!report.contains("layout")) return {};
  std::vector<std::string> highlight;
  if (kind == "proximity") {
    for (const auto& r : report["ranked"]) highlight.push_back(r["trait"].get<std::string>());
  }
  std::vector<std::string> members;
  if (report.contains("cluster")) members = report["cluster"].get<std::vector<std::string>>();
  std::vector<ScatterPoint> pts;
  for (const auto& p : report["layout"]["points"]) {
    const auto name = p["trait"].get<std::string>();
    const auto& c = p["coords"];
    ScatterPoint sp{name, c[0].get<double>(), c.size() > 1 ? c[1].get<double>() : 0.0, -1};
    if (std::find(members.begin(), members.end(), name) != members.end()) sp.group = 0;
    sp.highlight = std::find(highlight.begin(), highlight.end(), name) != highlight.end();
    pts.push_back(std::move(sp));
  }
  return scatter_svg(pts, std::string(kind) + " layout");
}

std::vector<fs::path> write_report_files(std::string_view kind, const json& report,
                                         const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  std::vector<fs::path> written;
  const std::string base(kind);
  write_text_file(out_dir / (base + ".json"), report_text(report));
  written.push_back(out_dir / (base + ".json"));
  write_text_file(out_dir / (base + ".csv"), report_csv(kind, report));
  written.push_back(out_dir / (base + ".csv"));
  if (const std::string svg = report_svg(kind, report); !svg.empty()) {
    write_text_file(out_dir / (base + ".svg"), svg);
    written.push_back(out_dir / (base + ".svg"));
  }
  return written;
}

json heatmap_report(const Heatmap& h) {
  json rows = json::array();
  for (std::size_t r = 0; r < h.height; ++r) rows.push_back(h.cells.row_vector(r));
  return {{"kind", "heatmap"},
          {"height", h.height},
          {"width", h.width},
          {"group_size", h.group_size},
          {"max_mean_abs_delta", h.max_mean_abs_delta},
          {"cells", rows}};
}

std::string heatmap_pgm(const Heatmap& h) {
  std::string out = "P5\n" + std::to_string(h.width) + " " + std::to_string(h.height) + "\n255\n";
  for (double v : h.cells.data()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39",
    "#7b4173", "#3182bd", "#e6550d", "#31a354", "#756bb1", "#636363"};

}  // namespace

std::string scatter_svg(const std::vector<ScatterPoint>& points, std::string_view title) {
  constexpr double kSize = 800.0;
  constexpr double kMargin = 60.0;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  const double xs = xmax > xmin ? (kSize - 2 * kMargin) / (xmax - xmin) : 1.0;
  const double ys = ymax > ymin ? (kSize - 2 * kMargin) / (ymax - ymin) : 1.0;
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << " " << kSize << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"30\" font-family=\"sans-serif\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  for (const auto& p : points) {
    const double x = kMargin + (p.x - xmin) * xs;
    const double y = kSize - kMargin - (p.y - ymin) * ys;
    const char* colour = p.group < 0 ? "#999999" : kPalette[p.group % 20];
    out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << (p.highlight ? 6 : 4)
        << "\" fill=\"" << colour << "\"" << (p.highlight ? " stroke=\"black\"" : "") << "/>\n";
    out << "<text x=\"" << x + 6 << "\" y=\"" << y - 4
        << "\" font-family=\"sans-serif\" font-size=\"9\">" << xml_escape(p.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace persona
