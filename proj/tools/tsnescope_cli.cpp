// Batch front end: every subcommand prints the same JSON the service returns.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsnescope/io/csv.hpp"
#include "tsnescope/io/json.hpp"
#include "tsnescope/io/session_store.hpp"
#include "tsnescope/service/server.hpp"
#include "tsnescope/tsnescope.hpp"

namespace ts = tsnescope;
using ts::io::json;

namespace {

enum ExitCode { ok = 0, usage = 2, io_failure = 3, invalid = 4, computation = 5, internal = 6 };

int exit_code_for(ts::ErrorKind kind) {
  switch (kind) {
    case ts::ErrorKind::validation: return invalid;
    case ts::ErrorKind::computation: return computation;
    case ts::ErrorKind::not_found:
    case ts::ErrorKind::io: return io_failure;
    default: return internal;
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ts::fail(ts::ErrorKind::io, "cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    ts::fail(ts::ErrorKind::validation, "'" + path + "' is not valid JSON: " + e.what());
  }
}

struct DatasetSource {
  std::string csv;
  std::string dataset;
  std::string label_column;

  void add(CLI::App* cmd) {
    auto* c = cmd->add_option("--csv", csv, "input CSV with a header row");
    auto* d = cmd->add_option("--dataset", dataset, "dataset JSON written by `ingest`");
    c->excludes(d);
    cmd->add_option("--label-column", label_column, "name of the categorical label column");
  }

  // Returns the dataset and the id the service would assign it.
  std::pair<ts::Dataset, std::string> load() const {
    if (!csv.empty()) {
      const std::string text = read_text(csv);
      std::optional<std::string> label;
      if (!label_column.empty()) label = label_column;
      auto ds = ts::io::ingest_csv(text, label);
      return {std::move(ds), ts::io::sha256_hex(label_column + "\n" + text).substr(0, 24)};
    }
    if (!dataset.empty()) {
      const std::string text = read_text(dataset);
      const json j = json::parse(text);
      return {ts::io::dataset_from_json(j), j.value("id", ts::io::sha256_hex(text).substr(0, 24))};
    }
    ts::fail(ts::ErrorKind::validation, "one of --csv or --dataset is required");
  }
};

ts::ProjectionRecord load_projection(const std::string& path, std::size_t expected_n) {
  const json j = read_json(path);
  auto rec = ts::io::record_from_json(j.contains("record") ? j.at("record") : j);
  if (rec.failed) ts::fail(ts::ErrorKind::validation, "projection '" + path + "' is a failed run");
  ts::require(rec.embedding.size() == expected_n, "projection size does not match the dataset");
  return rec;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) ts::fail(ts::ErrorKind::validation, "bad list entry '" + item + "'");
    out.push_back(v);
  }
  ts::require(!out.empty(), "empty list");
  return out;
}

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) ts::fail(ts::ErrorKind::io, "cannot write '" + out_path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"t-SNE projection assessment: runs, grid search, quality and interpretation queries"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_path;
  app.add_option("--out", out_path, "write JSON here instead of stdout");

  // ingest
  DatasetSource ingest_src;
  auto* ingest = app.add_subcommand("ingest", "parse a CSV into the dataset wire format");
  ingest_src.add(ingest);

  // run
  DatasetSource run_src;
  ts::TsneParams params;
  std::size_t quality_k = ts::default_quality_k;
  auto* run = app.add_subcommand("run", "run one t-SNE projection");
  run_src.add(run);
  run->add_option("--perplexity", params.perplexity);
  run->add_option("--learning-rate", params.learning_rate);
  run->add_option("--max-iterations", params.max_iterations);
  run->add_option("--theta", params.theta, "Barnes-Hut accuracy; 0 = exact");
  run->add_option("--seed", params.seed);
  run->add_option("--quality-k", quality_k);

  // grid
  DatasetSource grid_src;
  std::uint64_t grid_seed = 0;
  std::string perplexities, learning_rates, iterations;
  double grid_theta = 0.5;
  std::size_t representatives = ts::default_representatives, parallelism = 1, top = ts::default_top;
  std::size_t grid_k = ts::default_quality_k;
  std::string grid_metric = "QMA";
  auto* grid = app.add_subcommand("grid", "grid search + representative selection");
  grid_src.add(grid);
  grid->add_option("--seed", grid_seed, "seed base; configuration i uses seed + i");
  grid->add_option("--perplexities", perplexities, "comma-separated override");
  grid->add_option("--learning-rates", learning_rates, "comma-separated override");
  grid->add_option("--iterations", iterations, "comma-separated override");
  grid->add_option("--theta", grid_theta);
  grid->add_option("--representatives", representatives);
  grid->add_option("--parallelism", parallelism);
  grid->add_option("--metric", grid_metric, "ranking metric: NH, T, C, S, SDC or QMA");
  grid->add_option("--top", top);
  grid->add_option("--quality-k", grid_k);

  // quality
  DatasetSource quality_src;
  std::string quality_projection, quality_selection, quality_metric = "QMA";
  std::size_t quality_bins = 10, hist_bins = 20, qk = ts::default_quality_k;
  auto* quality = app.add_subcommand("quality", "scores, Shepard heatmap and histograms for a projection");
  quality_src.add(quality);
  quality->add_option("--projection", quality_projection)->required();
  quality->add_option("--selection", quality_selection, "selection JSON; adds a selection-scoped score");
  quality->add_option("--metric", quality_metric);
  quality->add_option("--bins", quality_bins);
  quality->add_option("--hist-bins", hist_bins);
  quality->add_option("--k", qk);

  // np
  DatasetSource np_src;
  std::string np_projection, np_selection, np_variant = "bar";
  std::optional<std::size_t> k_max;
  auto* np = app.add_subcommand("np", "neighborhood preservation curve");
  np_src.add(np);
  np->add_option("--projection", np_projection)->required();
  np->add_option("--selection", np_selection, "selection JSON (service request body)");
  np->add_option("--k-max", k_max);
  np->add_option("--variant", np_variant, "bar, diff-bar, line or diff-line");

  // dimcorr
  DatasetSource dc_src;
  std::string dc_projection, dc_polyline;
  auto* dimcorr = app.add_subcommand("dimcorr", "dimension correlation along a polyline");
  dc_src.add(dimcorr);
  dimcorr->add_option("--projection", dc_projection)->required();
  dimcorr->add_option("--polyline", dc_polyline, "polyline JSON (service request body)")->required();

  // axes
  DatasetSource axes_src;
  std::string axes_selection;
  auto* axes = app.add_subcommand("axes", "adaptive parallel-coordinates axes for a selection");
  axes_src.add(axes);
  axes->add_option("--selection", axes_selection)->required();

  // serve
  ts::service::Config serve_cfg = ts::service::config_from_env();
  std::string bind, data_dir;
  auto* serve = app.add_subcommand("serve", "start the HTTP/JSON service");
  serve->add_option("--bind", bind, "host:port (overrides TSNESCOPE_BIND)");
  serve->add_option("--data-dir", data_dir, "storage directory (overrides TSNESCOPE_DATA_DIR)");
  serve->add_option("--parallelism", serve_cfg.parallelism);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  }

  try {
    if (*ingest) {
      auto [ds, id] = ingest_src.load();
      json j = ts::io::to_json(ds);
      j["id"] = id;
      emit(j, out_path);
    } else if (*run) {
      auto [ds, id] = run_src.load();
      const auto effective = ts::clipped_for(params, ds.n());
      const json key = {{"dataset_id", id}, {"params", ts::io::to_json(effective)}, {"quality_k", quality_k}};
      const auto rec = ts::make_projection(ds, effective, ts::io::sha256_hex(key.dump()).substr(0, 24), quality_k);
      emit({{"id", rec.id}, {"dataset_id", id}, {"quality_k", quality_k}, {"record", ts::io::to_json(rec)}}, out_path);
    } else if (*grid) {
      auto [ds, id] = grid_src.load();
      ts::GridSpec spec = ts::default_grid(ds.n(), grid_seed);
      if (!perplexities.empty()) spec.perplexities = parse_list(perplexities);
      if (!learning_rates.empty()) spec.learning_rates = parse_list(learning_rates);
      if (!iterations.empty()) {
        spec.iteration_counts.clear();
        for (double v : parse_list(iterations)) spec.iteration_counts.push_back(static_cast<int>(v));
      }
      spec.theta = grid_theta;
      spec.quality_k = grid_k;
      const auto pool = ts::run_grid_search(ds, spec, parallelism);
      const auto reps = ts::select_representatives(pool, representatives, parallelism);
      std::vector<ts::ProjectionRecord> chosen;
      json records = json::array();
      for (const auto& rid : reps.medoid_ids)
        for (const auto& rec : pool)
          if (rec.id == rid) {
            chosen.push_back(rec);
            records.push_back(ts::io::to_json(rec));
          }
      const auto ranking =
          ts::rank_representatives(ds, chosen, ts::parse_metric(grid_metric), std::nullopt, top, grid_k);
      std::size_t failed = 0;
      for (const auto& rec : pool) failed += rec.failed ? 1 : 0;
      emit({{"dataset_id", id},
            {"grid", ts::io::to_json(spec)},
            {"pool_size", pool.size()},
            {"failed_runs", failed},
            {"representative_set", ts::io::to_json(reps)},
            {"representatives", records},
            {"ranking", {{"metric", grid_metric}, {"ids", ranking}}}},
           out_path);
    } else if (*quality) {
      auto [ds, id] = quality_src.load();
      const auto rec = load_projection(quality_projection, ds.n());
      const auto hd = ts::pairwise_distances(ds);
      const auto ld = ts::pairwise_distances(rec.embedding.coords);
      json j = {{"scores", ts::io::to_json(ts::compute_quality_scores(ds, rec.embedding, qk))},
                {"shepard", ts::io::to_json(ts::shepard_heatmap(hd, ld, quality_bins))},
                {"histograms", ts::io::to_json(ts::density_cost_histograms(rec.instrumentation, hist_bins))}};
      if (!quality_selection.empty()) {
        const auto sel = ts::io::selection_from_json(read_json(quality_selection), ds.n());
        ts::require(sel.has_value(), "selection file holds no indices");
        const auto metric = ts::parse_metric(quality_metric);
        j["selection_score"] = {{"metric", ts::to_string(metric)},
                                {"value", ts::selection_quality(ds, rec.embedding, *sel, metric, qk)}};
      }
      emit(j, out_path);
    } else if (*np) {
      auto [ds, id] = np_src.load();
      const auto rec = load_projection(np_projection, ds.n());
      std::optional<ts::Selection> sel;
      if (!np_selection.empty()) sel = ts::io::selection_from_json(read_json(np_selection), ds.n());
      ts::io::parse_np_variant(np_variant);
      const auto curve = ts::neighborhood_preservation(ts::pairwise_distances(ds),
                                                       ts::pairwise_distances(rec.embedding.coords), sel,
                                                       k_max.value_or(ts::default_np_k_max(ds.n())));
      emit(ts::io::to_json(curve, np_variant), out_path);
    } else if (*dimcorr) {
      auto [ds, id] = dc_src.load();
      const auto rec = load_projection(dc_projection, ds.n());
      const auto request = ts::io::dimcorr_request_from_json(read_json(dc_polyline), rec.embedding);
      const auto proj = ts::project_to_polyline(rec.embedding, request.polyline);
      const auto corr = ts::dimension_correlation(ds, proj, request.threshold);
      emit({{"rho", request.polyline.rho()}, {"captured", proj.size()}, {"correlations", ts::io::to_json(corr)}},
           out_path);
    } else if (*axes) {
      auto [ds, id] = axes_src.load();
      const auto sel = ts::io::selection_from_json(read_json(axes_selection), ds.n());
      ts::require(sel.has_value(), "selection file holds no indices");
      emit({{"axes", ts::io::to_json(ts::adaptive_axes(ds, *sel), ds)}}, out_path);
    } else if (*serve) {
      if (!bind.empty()) {
        const auto colon = bind.rfind(':');
        ts::require(colon != std::string::npos, "--bind expects host:port");
        serve_cfg.host = bind.substr(0, colon);
        serve_cfg.port = std::stoi(bind.substr(colon + 1));
      }
      if (!data_dir.empty()) serve_cfg.data_dir = data_dir;
      std::cerr << "listening on " << serve_cfg.host << ":" << serve_cfg.port << " (data: " << serve_cfg.data_dir.string()
                << ")\n";
      if (!ts::service::serve(serve_cfg)) ts::fail(ts::ErrorKind::io, "cannot bind " + serve_cfg.host);
    }
  } catch (const ts::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return invalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return invalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return internal;
  }
  return ok;
}
