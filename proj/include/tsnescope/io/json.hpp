#pragma once

// Wire format shared by the HTTP service and the CLI. Float arrays that must
// round-trip bit-exactly (embeddings, instrumentation) travel as base64
// little-endian binary64 blocks: {"encoding": "f64le-base64", "shape": [...],
// "data": "..."}.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsnescope/dataset.hpp"
#include "tsnescope/error.hpp"
#include "tsnescope/interpret.hpp"
#include "tsnescope/io/base64.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/search.hpp"
#include "tsnescope/tsne.hpp"

namespace tsnescope::io {

using json = nlohmann::json;

inline constexpr const char* f64_encoding = "f64le-base64";

inline json encode_array(const std::vector<double>& values, std::vector<std::size_t> shape) {
  return {{"encoding", f64_encoding}, {"shape", shape}, {"data", encode_f64(values)}};
}

inline std::vector<double> decode_array(const json& j, std::size_t expected_size) {
  if (!j.is_object() || j.value("encoding", "") != f64_encoding)
    fail(ErrorKind::validation, std::string("expected an ") + f64_encoding + " array");
  auto values = decode_f64(j.at("data").get<std::string>());
  if (values.size() != expected_size) fail(ErrorKind::corrupted, "encoded array has the wrong length");
  return values;
}

// --- parameters -----------------------------------------------------------

inline json to_json(const TsneParams& p) {
  return {{"perplexity", p.perplexity},
          {"learning_rate", p.learning_rate},
          {"max_iterations", p.max_iterations},
          {"theta", p.theta},
          {"seed", p.seed}};
}

// Missing fields take their defaults.
inline TsneParams params_from_json(const json& j) {
  TsneParams p;
  if (!j.is_object()) fail(ErrorKind::validation, "params must be an object");
  p.perplexity = j.value("perplexity", p.perplexity);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.max_iterations = j.value("max_iterations", p.max_iterations);
  p.theta = j.value("theta", p.theta);
  p.seed = j.value("seed", p.seed);
  validate(p);
  return p;
}

inline json to_json(const GridSpec& g) {
  return {{"perplexities", g.perplexities}, {"learning_rates", g.learning_rates},
          {"iteration_counts", g.iteration_counts}, {"seed_base", g.seed_base},
          {"theta", g.theta}, {"quality_k", g.quality_k}};
}

inline GridSpec grid_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::validation, "grid must be an object");
  GridSpec g;
  g.perplexities = j.at("perplexities").get<std::vector<double>>();
  g.learning_rates = j.at("learning_rates").get<std::vector<double>>();
  g.iteration_counts = j.at("iteration_counts").get<std::vector<int>>();
  g.seed_base = j.value("seed_base", g.seed_base);
  g.theta = j.value("theta", g.theta);
  g.quality_k = j.value("quality_k", g.quality_k);
  validate(g);
  return g;
}

// --- dataset --------------------------------------------------------------

inline json to_json(const Dataset& ds) {
  json values = json::array();
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto row = ds.values().row(i);
    values.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"n", ds.n()},
          {"d", ds.d()},
          {"dim_names", ds.dim_names()},
          {"labels", ds.labels() ? json(*ds.labels()) : json(nullptr)},
          {"values", values}};
}

inline Dataset dataset_from_json(const json& j) {
  const auto names = j.at("dim_names").get<std::vector<std::string>>();
  const auto rows = j.at("values").get<std::vector<std::vector<double>>>();
  Matrix values(rows.size(), names.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == names.size(), "dataset row " + std::to_string(i) + " has the wrong length");
    for (std::size_t k = 0; k < names.size(); ++k) values(i, k) = rows[i][k];
  }
  std::optional<std::vector<std::string>> labels;
  if (j.contains("labels") && !j.at("labels").is_null()) labels = j.at("labels").get<std::vector<std::string>>();
  return Dataset::create(std::move(values), names, std::move(labels));
}

// --- projection -----------------------------------------------------------

inline json to_json(const Embedding& e) { return encode_array(e.coords.data(), {e.size(), 2}); }

inline Embedding embedding_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2 || shape[1] != 2) fail(ErrorKind::validation, "embedding shape must be [n, 2]");
  return Embedding{Matrix(shape[0], 2, decode_array(j, shape[0] * 2))};
}

inline json to_json(const Instrumentation& inst) {
  const std::size_t n = inst.sigma.size();
  return {{"sigma", encode_array(inst.sigma, {n})},
          {"density", encode_array(inst.density, {n})},
          {"point_cost", encode_array(inst.point_cost, {n})},
          {"total_cost", encode_array({inst.total_cost}, {1})}};
}

inline Instrumentation instrumentation_from_json(const json& j, std::size_t n) {
  Instrumentation inst;
  inst.sigma = decode_array(j.at("sigma"), n);
  inst.density = decode_array(j.at("density"), n);
  inst.point_cost = decode_array(j.at("point_cost"), n);
  inst.total_cost = decode_array(j.at("total_cost"), 1)[0];
  return inst;
}

inline json to_json(const QualityScores& q) {
  return {{"NH", q.nh ? json(*q.nh) : json(nullptr)}, {"T", q.t}, {"C", q.c},
          {"S", q.s}, {"SDC", q.sdc}, {"QMA", q.qma}};
}

inline QualityScores scores_from_json(const json& j) {
  QualityScores q;
  if (j.contains("NH") && !j.at("NH").is_null()) q.nh = j.at("NH").get<double>();
  q.t = j.at("T").get<double>();
  q.c = j.at("C").get<double>();
  q.s = j.at("S").get<double>();
  q.sdc = j.at("SDC").get<double>();
  q.qma = j.at("QMA").get<double>();
  return q;
}

inline json to_json(const ProjectionRecord& r) {
  json j = {{"id", r.id}, {"params", to_json(r.params)}, {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
    return j;
  }
  j["embedding"] = to_json(r.embedding);
  j["instrumentation"] = to_json(r.instrumentation);
  j["scores"] = to_json(r.scores);
  return j;
}

inline ProjectionRecord record_from_json(const json& j) {
  ProjectionRecord r;
  r.id = j.at("id").get<std::string>();
  r.params = params_from_json(j.at("params"));
  r.failed = j.value("failed", false);
  if (r.failed) {
    r.error = j.value("error", "");
    return r;
  }
  r.embedding = embedding_from_json(j.at("embedding"));
  r.instrumentation = instrumentation_from_json(j.at("instrumentation"), r.embedding.size());
  r.scores = scores_from_json(j.at("scores"));
  return r;
}

inline json to_json(const RepresentativeSet& reps) {
  json assignment = json::array();
  for (const auto& a : reps.cluster_assignment) assignment.push_back(a ? json(*a) : json(nullptr));
  return {{"medoid_ids", reps.medoid_ids}, {"cluster_assignment", assignment}, {"cost", reps.cost}};
}

inline RepresentativeSet representatives_from_json(const json& j) {
  RepresentativeSet reps;
  reps.medoid_ids = j.at("medoid_ids").get<std::vector<std::string>>();
  for (const auto& a : j.at("cluster_assignment"))
    reps.cluster_assignment.push_back(a.is_null() ? std::nullopt : std::optional<std::size_t>(a.get<std::size_t>()));
  reps.cost = j.value("cost", 0.0);
  return reps;
}

// --- quality views --------------------------------------------------------

inline json to_json(const ShepardHeatmap& map) {
  json rows = json::array();
  for (std::size_t y = 0; y < map.bins; ++y) {
    std::vector<std::uint64_t> row(map.counts.begin() + static_cast<std::ptrdiff_t>(y * map.bins),
                                   map.counts.begin() + static_cast<std::ptrdiff_t>((y + 1) * map.bins));
    rows.push_back(row);
  }
  return {{"mode", "heatmap"}, {"bins", map.bins}, {"x", "low_d_distance"}, {"y", "high_d_distance"},
          {"counts", rows}};
}

inline json to_json(const std::vector<ShepardPair>& pairs) {
  json out = json::array();
  for (const auto& p : pairs) out.push_back({{"i", p.i}, {"j", p.j}, {"x", p.x}, {"y", p.y}});
  return {{"mode", "pairs"}, {"pairs", out}};
}

inline json to_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

inline json to_json(const DensityCostHistograms& h) {
  return {{"density", to_json(h.density)}, {"cost", to_json(h.cost)}};
}

enum class NPVariant { bar, diff_bar, line, diff_line };

inline NPVariant parse_np_variant(const std::string& s) {
  if (s == "bar") return NPVariant::bar;
  if (s == "diff-bar") return NPVariant::diff_bar;
  if (s == "line") return NPVariant::line;
  if (s == "diff-line") return NPVariant::diff_line;
  fail(ErrorKind::validation, "unknown NP variant '" + s + "' (expected bar, diff-bar, line or diff-line)");
}

// Difference variants carry selection - global per k.
inline json to_json(const NPCurve& curve, const std::string& variant = "bar") {
  const NPVariant v = parse_np_variant(variant);
  json j = {{"variant", variant}, {"k", curve.k_values}, {"global", curve.global}};
  if (curve.selection) {
    j["selection"] = *curve.selection;
    if (v == NPVariant::diff_bar || v == NPVariant::diff_line) {
      std::vector<double> diff(curve.global.size());
      for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = (*curve.selection)[k] - curve.global[k];
      j["difference"] = diff;
    }
  }
  return j;
}

// --- interpretation -------------------------------------------------------

inline json to_json(const PolylineProjection& proj) {
  json out = json::array();
  for (const auto& p : proj) out.push_back({{"index", p.index}, {"arclength", p.arclength}, {"distance", p.distance}});
  return out;
}

inline json to_json(const DimensionCorrelation& corr) {
  json out = json::array();
  for (const auto& c : corr)
    out.push_back({{"dimension", c.dimension}, {"name", c.name}, {"coefficient", c.coefficient},
                   {"relevance", std::abs(c.coefficient)}});
  return out;
}

inline json to_json(const AxisSelection& axes, const Dataset& ds) {
  json out = json::array();
  for (const auto& a : axes)
    out.push_back({{"dimension", a.dimension}, {"name", ds.dim_names()[a.dimension]}, {"weight", a.weight}});
  return out;
}

// --- request bodies (also the CLI sidecar files) -------------------------

// Accepts {"selection": [...]} or a bare index array. Empty or null yields nullopt.
inline std::optional<Selection> selection_from_json(const json& j, std::size_t n) {
  const json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("selection") || j.at("selection").is_null()) return std::nullopt;
    arr = &j.at("selection");
  }
  if (arr->is_null()) return std::nullopt;
  if (!arr->is_array()) fail(ErrorKind::validation, "selection must be an array of point indices");
  std::vector<std::size_t> idx;
  for (const auto& v : *arr) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(ErrorKind::validation, "selection entries must be non-negative integers");
    idx.push_back(v.get<std::size_t>());
  }
  if (idx.empty()) return std::nullopt;
  return Selection::create(std::move(idx), n);
}

inline std::vector<Point2> vertices_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::validation, "polyline must be an array of [x, y] vertices");
  std::vector<Point2> out;
  for (const auto& v : j) {
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
      out.push_back({v[0].get<double>(), v[1].get<double>()});
    else if (v.is_object() && v.contains("x") && v.contains("y"))
      out.push_back({v.at("x").get<double>(), v.at("y").get<double>()});
    else
      fail(ErrorKind::validation, "polyline vertices must be [x, y] pairs");
  }
  return out;
}

// {"polyline": [[x, y], ...], "rho": r?, "threshold": t?}; rho defaults to 5%
// of the embedding's bounding-box diagonal.
struct DimCorrRequest {
  Polyline polyline;
  double threshold = 0.0;
};

inline DimCorrRequest dimcorr_request_from_json(const json& j, const Embedding& embedding) {
  if (!j.is_object() || !j.contains("polyline")) fail(ErrorKind::validation, "body must contain a polyline");
  const auto vertices = vertices_from_json(j.at("polyline"));
  const double rho = j.contains("rho") && !j.at("rho").is_null() ? j.at("rho").get<double>() : default_rho(embedding);
  const double threshold = j.value("threshold", 0.0);
  require(std::isfinite(threshold) && threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0, 1]");
  return {Polyline::create(vertices, rho), threshold};
}

}  // namespace tsnescope::io
