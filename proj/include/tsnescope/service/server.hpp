#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tsnescope/error.hpp"
#include "tsnescope/interpret.hpp"
#include "tsnescope/io/csv.hpp"
#include "tsnescope/io/json.hpp"
#include "tsnescope/io/session_store.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/search.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace tsnescope::service {

using io::json;

struct Config {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "tsnescope-data";
  std::size_t parallelism = std::max(1u, std::thread::hardware_concurrency());
};

// TSNESCOPE_BIND ("host:port") and TSNESCOPE_DATA_DIR override the defaults.
inline Config config_from_env() {
  Config cfg;
  if (const char* bind = std::getenv("TSNESCOPE_BIND"); bind && *bind) {
    const std::string b(bind);
    const auto colon = b.rfind(':');
    if (colon == std::string::npos) {
      cfg.host = b;
    } else {
      cfg.host = b.substr(0, colon);
      cfg.port = std::stoi(b.substr(colon + 1));
    }
  }
  if (const char* dir = std::getenv("TSNESCOPE_DATA_DIR"); dir && *dir) cfg.data_dir = dir;
  return cfg;
}

inline int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::migration: return 409;
    case ErrorKind::computation: return 422;
    case ErrorKind::corrupted: return 500;
    case ErrorKind::io: return 500;
  }
  return 500;
}

struct Job {
  std::string id;
  std::string session_id;
  std::string state = "queued";  // queued | running | succeeded | failed
  std::size_t completed = 0;
  std::size_t total = 0;
  json result;
  std::string error;
};

// JSON API over the core library. Completed datasets and projections are
// written once and served verbatim, so repeated GETs are byte-identical.
class Service {
 public:
  explicit Service(Config config) : config_(std::move(config)), sessions_(config_.data_dir) {
    std::filesystem::create_directories(config_.data_dir / "datasets");
    std::filesystem::create_directories(config_.data_dir / "projections");
  }

  ~Service() { wait_for_jobs(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void mount(httplib::Server& http) {
    http.Post("/datasets", wrap([this](const auto& req, auto& res) { post_dataset(req, res); }));
    http.Get(R"(/datasets/([A-Za-z0-9_-]+))", wrap([this](const auto& req, auto& res) { get_dataset(req, res); }));
    http.Post("/sessions", wrap([this](const auto& req, auto& res) { post_session(req, res); }));
    http.Get(R"(/sessions/([A-Za-z0-9_-]+))", wrap([this](const auto& req, auto& res) { get_session(req, res); }));
    http.Post(R"(/sessions/([A-Za-z0-9_-]+)/grid-search)",
              wrap([this](const auto& req, auto& res) { post_grid_search(req, res); }));
    http.Get(R"(/jobs/([A-Za-z0-9_-]+))", wrap([this](const auto& req, auto& res) { get_job(req, res); }));
    http.Get(R"(/sessions/([A-Za-z0-9_-]+)/representatives)",
             wrap([this](const auto& req, auto& res) { get_representatives(req, res); }));
    http.Post(R"(/sessions/([A-Za-z0-9_-]+)/representatives/rank)",
              wrap([this](const auto& req, auto& res) { post_rank(req, res); }));
    http.Post("/runs", wrap([this](const auto& req, auto& res) { post_run(req, res); }));
    http.Get(R"(/projections/([A-Za-z0-9_-]+))", wrap([this](const auto& req, auto& res) { get_projection(req, res); }));
    http.Get(R"(/projections/([A-Za-z0-9_-]+)/shepard)",
             wrap([this](const auto& req, auto& res) { get_shepard(req, res); }));
    http.Get(R"(/projections/([A-Za-z0-9_-]+)/histograms)",
             wrap([this](const auto& req, auto& res) { get_histograms(req, res); }));
    http.Post(R"(/projections/([A-Za-z0-9_-]+)/np)", wrap([this](const auto& req, auto& res) { post_np(req, res); }));
    http.Post(R"(/projections/([A-Za-z0-9_-]+)/dimension-correlation)",
              wrap([this](const auto& req, auto& res) { post_dimcorr(req, res); }));
    http.Post(R"(/projections/([A-Za-z0-9_-]+)/adaptive-axes)",
              wrap([this](const auto& req, auto& res) { post_axes(req, res); }));
    http.Post(R"(/sessions/([A-Za-z0-9_-]+)/annotations)",
              wrap([this](const auto& req, auto& res) { post_annotation(req, res); }));
  }

  void wait_for_jobs() {
    std::vector<std::jthread> threads;
    {
      std::lock_guard lock(jobs_mutex_);
      threads.swap(job_threads_);
    }
    threads.clear();  // joins
  }

  const Config& config() const noexcept { return config_; }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, {{"error", {{"code", code}, {"message", message}}}}, status);
  }

  static Handler wrap(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      try {
        inner(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.kind()), to_string(e.kind()), e.what());
      } catch (const json::parse_error& e) {
        send_error(res, 400, "invalid_json", e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "validation_error", e.what());
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, "validation_error", e.what());
      } catch (const std::out_of_range& e) {
        send_error(res, 400, "validation_error", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal_error", e.what());
      }
    };
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body);
    if (!j.is_object()) fail(ErrorKind::validation, "request body must be a JSON object");
    return j;
  }

  template <typename T>
  static T query(const httplib::Request& req, const std::string& key, T fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string v = req.get_param_value(key);
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else {
      std::size_t used = 0;
      const long long parsed = std::stoll(v, &used);
      if (used != v.size() || parsed < 0) fail(ErrorKind::validation, "query parameter '" + key + "' must be a non-negative integer");
      return static_cast<T>(parsed);
    }
  }

  std::filesystem::path dataset_path(const std::string& id) const {
    return config_.data_dir / "datasets" / (id + ".json");
  }
  std::filesystem::path projection_path(const std::string& id) const {
    return config_.data_dir / "projections" / (id + ".json");
  }

  std::shared_ptr<const Dataset> dataset(const std::string& id) {
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = datasets_.find(id); it != datasets_.end()) return it->second;
    }
    if (!io::detail::valid_id(id) || !std::filesystem::exists(dataset_path(id)))
      fail(ErrorKind::not_found, "dataset '" + id + "' not found");
    auto ds = std::make_shared<const Dataset>(io::dataset_from_json(json::parse(io::detail::read_file(dataset_path(id)))));
    std::lock_guard lock(cache_mutex_);
    return datasets_.emplace(id, std::move(ds)).first->second;
  }

  struct StoredProjection {
    std::string dataset_id;
    ProjectionRecord record;
    std::size_t quality_k = default_quality_k;
  };

  StoredProjection projection(const std::string& id) {
    if (!io::detail::valid_id(id) || !std::filesystem::exists(projection_path(id)))
      fail(ErrorKind::not_found, "projection '" + id + "' not found");
    const json j = json::parse(io::detail::read_file(projection_path(id)));
    return {j.at("dataset_id").get<std::string>(), io::record_from_json(j.at("record")),
            j.value("quality_k", default_quality_k)};
  }

  static std::string projection_id(const std::string& dataset_id, const TsneParams& params, std::size_t quality_k) {
    const json key = {{"dataset_id", dataset_id}, {"params", io::to_json(params)}, {"quality_k", quality_k}};
    return io::sha256_hex(key.dump()).substr(0, 24);
  }

  // Write-once; an existing file with the same content id is kept.
  void store_projection(const std::string& dataset_id, const ProjectionRecord& rec, std::size_t quality_k) {
    const auto path = projection_path(rec.id);
    std::lock_guard lock(store_mutex_);
    if (std::filesystem::exists(path)) return;
    const json j = {{"id", rec.id}, {"dataset_id", dataset_id}, {"quality_k", quality_k}, {"record", io::to_json(rec)}};
    io::detail::write_file_atomic(path, j.dump());
  }

  // --- handlers -----------------------------------------------------------

  void post_dataset(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    if (!body.contains("csv") || !body.at("csv").is_string()) fail(ErrorKind::validation, "body must contain 'csv' text");
    const std::string csv = body.at("csv").get<std::string>();
    std::optional<std::string> label;
    if (body.contains("label_column") && !body.at("label_column").is_null())
      label = body.at("label_column").get<std::string>();
    const Dataset ds = io::ingest_csv(csv, label);
    const std::string id = io::sha256_hex((label ? *label : std::string()) + "\n" + csv).substr(0, 24);
    {
      std::lock_guard lock(store_mutex_);
      if (!std::filesystem::exists(dataset_path(id))) {
        json j = io::to_json(ds);
        j["id"] = id;
        j["name"] = body.value("name", "");
        io::detail::write_file_atomic(dataset_path(id), j.dump());
      }
    }
    send_json(res, {{"id", id}, {"n", ds.n()}, {"d", ds.d()}, {"dim_names", ds.dim_names()}, {"has_labels", ds.has_labels()}},
              201);
  }

  void get_dataset(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    dataset(id);
    res.set_content(io::detail::read_file(dataset_path(id)), "application/json");
  }

  void post_session(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    if (!body.contains("dataset_id")) fail(ErrorKind::validation, "body must contain 'dataset_id'");
    io::SessionStore store;
    store.dataset_id = body.at("dataset_id").get<std::string>();
    dataset(store.dataset_id);
    sessions_.save(store);
    send_json(res, io::to_json(store), 201);
  }

  void get_session(const httplib::Request& req, httplib::Response& res) {
    send_json(res, io::to_json(sessions_.load(req.matches[1])));
  }

  void post_grid_search(const httplib::Request& req, httplib::Response& res) {
    const std::string session_id = req.matches[1];
    const json body = body_of(req);
    const io::SessionStore store = sessions_.load(session_id);
    auto ds = dataset(store.dataset_id);
    GridSpec grid = body.contains("grid") && !body.at("grid").is_null()
                        ? io::grid_from_json(body.at("grid"))
                        : default_grid(ds->n(), body.value("seed", std::uint64_t{0}));
    const std::size_t k = body.value("representatives", default_representatives);
    require(k >= 1, "representatives must be >= 1");
    const std::size_t parallelism = body.value("parallelism", config_.parallelism);

    auto job = std::make_shared<Job>();
    job->id = io::random_id();
    job->session_id = session_id;
    job->total = grid.size();
    {
      std::lock_guard lock(jobs_mutex_);
      if (auto it = active_.find(session_id); it != active_.end())
        fail(ErrorKind::conflict, "session already has an active grid search (job " + it->second + ")");
      active_[session_id] = job->id;
      jobs_[job->id] = job;
      job_threads_.emplace_back([this, job, grid, ds, k, parallelism, dataset_id = store.dataset_id] {
        run_job(job, grid, ds, dataset_id, k, parallelism);
      });
    }
    send_json(res, {{"job_id", job->id}, {"total", job->total}}, 202);
  }

  void run_job(const std::shared_ptr<Job>& job, const GridSpec& grid, const std::shared_ptr<const Dataset>& ds,
               const std::string& dataset_id, std::size_t k, std::size_t parallelism) {
    {
      std::lock_guard lock(jobs_mutex_);
      job->state = "running";
    }
    try {
      auto pool = run_grid_search(*ds, grid, parallelism, [&](std::size_t done, std::size_t) {
        std::lock_guard lock(jobs_mutex_);
        job->completed = std::max(job->completed, done);
      });
      for (auto& rec : pool) rec.id = projection_id(dataset_id, rec.params, grid.quality_k);
      const RepresentativeSet reps = select_representatives(pool, k, parallelism);
      std::vector<ProjectionRecord> chosen;
      for (const auto& id : reps.medoid_ids)
        for (const auto& rec : pool)
          if (rec.id == id) {
            store_projection(dataset_id, rec, grid.quality_k);
            chosen.push_back(rec);
            break;
          }
      {
        std::lock_guard session_lock(sessions_.mutex_for(job->session_id));
        io::SessionStore store = sessions_.load(job->session_id);
        store.grid = grid;
        store.representatives = std::move(chosen);
        store.representative_set = reps;
        store.chosen_projection_id = reps.medoid_ids.empty() ? std::nullopt : std::optional(reps.medoid_ids.front());
        sessions_.save(store);
      }
      std::size_t failed = 0;
      for (const auto& rec : pool) failed += rec.failed ? 1 : 0;
      std::lock_guard lock(jobs_mutex_);
      job->result = {{"session_id", job->session_id}, {"representative_ids", reps.medoid_ids}, {"failed_runs", failed}};
      job->completed = job->total;
      job->state = "succeeded";
      active_.erase(job->session_id);
    } catch (const std::exception& e) {
      std::lock_guard lock(jobs_mutex_);
      job->error = e.what();
      job->state = "failed";
      active_.erase(job->session_id);
    }
  }

  void get_job(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(req.matches[1]);
    if (it == jobs_.end()) fail(ErrorKind::not_found, "job '" + std::string(req.matches[1]) + "' not found");
    const Job& job = *it->second;
    json j = {{"id", job.id},
              {"session_id", job.session_id},
              {"state", job.state},
              {"completed", job.completed},
              {"total", job.total},
              {"progress", job.total ? static_cast<double>(job.completed) / static_cast<double>(job.total) : 0.0}};
    if (job.state == "succeeded") j["result"] = job.result;
    if (job.state == "failed") j["error"] = job.error;
    send_json(res, j);
  }

  static json representative_summary(const ProjectionRecord& rec) {
    return {{"id", rec.id}, {"params", io::to_json(rec.params)}, {"scores", io::to_json(rec.scores)},
            {"thumbnail", io::to_json(thumbnail(rec.embedding))}};
  }

  void get_representatives(const httplib::Request& req, httplib::Response& res) {
    const io::SessionStore store = sessions_.load(req.matches[1]);
    auto ds = dataset(store.dataset_id);
    const Metric metric = parse_metric(query<std::string>(req, "metric", "QMA"));
    const std::size_t top = query<std::size_t>(req, "top", default_top);
    const std::size_t k = store.grid ? store.grid->quality_k : default_quality_k;
    const auto ids = rank_representatives(*ds, store.representatives, metric, std::nullopt, top, k);
    json records = json::array();
    for (const auto& id : ids)
      for (const auto& rec : store.representatives)
        if (rec.id == id) records.push_back(representative_summary(rec));
    send_json(res, {{"metric", to_string(metric)}, {"ids", ids}, {"records", records}});
  }

  void post_rank(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    const io::SessionStore store = sessions_.load(req.matches[1]);
    auto ds = dataset(store.dataset_id);
    const Metric metric = parse_metric(body.value("metric", std::string("QMA")));
    const auto selection = io::selection_from_json(body, ds->n());
    const std::size_t top = body.value("top", default_top);
    const std::size_t k = store.grid ? store.grid->quality_k : default_quality_k;
    const auto ids = rank_representatives(*ds, store.representatives, metric, selection, top, k);
    send_json(res, {{"metric", to_string(metric)}, {"selection_size", selection ? selection->size() : 0}, {"ids", ids}});
  }

  void post_run(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    if (!body.contains("dataset_id")) fail(ErrorKind::validation, "body must contain 'dataset_id'");
    const std::string dataset_id = body.at("dataset_id").get<std::string>();
    auto ds = dataset(dataset_id);
    const TsneParams params = io::params_from_json(body.value("params", json::object()));
    const std::size_t quality_k = body.value("quality_k", default_quality_k);
    std::optional<std::string> session_id;
    if (body.contains("session_id") && !body.at("session_id").is_null())
      session_id = body.at("session_id").get<std::string>();
    if (session_id && !sessions_.exists(*session_id)) fail(ErrorKind::not_found, "session '" + *session_id + "' not found");

    const TsneParams effective = clipped_for(params, ds->n());
    ProjectionRecord rec = make_projection(*ds, effective, projection_id(dataset_id, effective, quality_k), quality_k);
    store_projection(dataset_id, rec, quality_k);

    if (session_id) {
      std::lock_guard lock(sessions_.mutex_for(*session_id));
      io::SessionStore store = sessions_.load(*session_id);
      if (store.dataset_id != dataset_id) fail(ErrorKind::validation, "session belongs to a different dataset");
      RepresentativeSet single;
      single.medoid_ids = {rec.id};
      store.grid.reset();
      store.representatives = {rec};
      store.representative_set = single;
      store.chosen_projection_id = rec.id;
      sessions_.save(store);
    }
    res.status = 201;
    res.set_content(io::detail::read_file(projection_path(rec.id)), "application/json");
  }

  void get_projection(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!io::detail::valid_id(id) || !std::filesystem::exists(projection_path(id)))
      fail(ErrorKind::not_found, "projection '" + id + "' not found");
    res.set_content(io::detail::read_file(projection_path(id)), "application/json");
  }

  void get_shepard(const httplib::Request& req, httplib::Response& res) {
    const auto stored = projection(req.matches[1]);
    auto ds = dataset(stored.dataset_id);
    const std::string mode = query<std::string>(req, "mode", "heatmap");
    const Matrix hd = pairwise_distances(*ds);
    const Matrix ld = pairwise_distances(stored.record.embedding.coords);
    if (mode == "heatmap") {
      send_json(res, io::to_json(shepard_heatmap(hd, ld, query<std::size_t>(req, "bins", 10))));
    } else if (mode == "pairs") {
      const auto pairs = shepard_pairs(hd, ld, query<std::size_t>(req, "cap", 5000), query<std::uint64_t>(req, "seed", 0));
      send_json(res, io::to_json(pairs));
    } else {
      fail(ErrorKind::validation, "mode must be 'heatmap' or 'pairs'");
    }
  }

  void get_histograms(const httplib::Request& req, httplib::Response& res) {
    const auto stored = projection(req.matches[1]);
    send_json(res, io::to_json(density_cost_histograms(stored.record.instrumentation, query<std::size_t>(req, "bins", 20))));
  }

  void post_np(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    const auto stored = projection(req.matches[1]);
    auto ds = dataset(stored.dataset_id);
    const auto selection = io::selection_from_json(body, ds->n());
    const std::size_t k_max = body.contains("k_max") && !body.at("k_max").is_null() ? body.at("k_max").get<std::size_t>()
                                                                                       : default_np_k_max(ds->n());
    const std::string variant = body.value("variant", std::string("bar"));
    io::parse_np_variant(variant);
    const auto curve = neighborhood_preservation(pairwise_distances(*ds), pairwise_distances(stored.record.embedding.coords),
                                                 selection, k_max);
    send_json(res, io::to_json(curve, variant));
  }

  void post_dimcorr(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    const auto stored = projection(req.matches[1]);
    auto ds = dataset(stored.dataset_id);
    const auto request = io::dimcorr_request_from_json(body, stored.record.embedding);
    const auto proj = project_to_polyline(stored.record.embedding, request.polyline);
    const auto corr = dimension_correlation(*ds, proj, request.threshold);
    send_json(res, {{"rho", request.polyline.rho()}, {"captured", proj.size()}, {"correlations", io::to_json(corr)}});
  }

  void post_axes(const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req);
    const auto stored = projection(req.matches[1]);
    auto ds = dataset(stored.dataset_id);
    const auto selection = io::selection_from_json(body, ds->n());
    if (!selection) fail(ErrorKind::validation, "body must contain a non-empty 'selection'");
    send_json(res, {{"axes", io::to_json(adaptive_axes(*ds, *selection), *ds)}});
  }

  void post_annotation(const httplib::Request& req, httplib::Response& res) {
    const std::string session_id = req.matches[1];
    const json body = body_of(req);
    if (!body.contains("text") || !body.at("text").is_string()) fail(ErrorKind::validation, "body must contain 'text'");
    std::lock_guard lock(sessions_.mutex_for(session_id));
    io::SessionStore store = sessions_.load(session_id);
    io::Annotation note;
    note.timestamp = io::utc_timestamp();
    note.author = body.value("author", std::string("anonymous"));
    note.text = body.at("text").get<std::string>();
    if (const auto sel = io::selection_from_json(body, dataset(store.dataset_id)->n())) note.selection = sel->indices();
    store.annotations.push_back(note);
    sessions_.save(store);
    send_json(res, io::to_json(note), 201);
  }

  Config config_;
  io::SessionRepository sessions_;
  std::mutex cache_mutex_;
  std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::map<std::string, std::string> active_;  // session id -> job id
  std::vector<std::jthread> job_threads_;
};

// Blocks serving on the configured address.
inline bool serve(const Config& config) {
  Service service(config);
  httplib::Server http;
  service.mount(http);
  return http.listen(config.host, config.port);
}

}  // namespace tsnescope::service
