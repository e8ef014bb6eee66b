#pragma once

// Local HTTP/JSON front end. Each API session wraps a pipeline Session plus
// the pool of labeled vectors collected so far. Requests for one session are
// serialized by a per-session mutex; distinct sessions run concurrently on
// the server's worker threads.

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "visage/pipeline.hpp"
#include "visage/report.hpp"

namespace visage {

// ---- logging (level from VISAGE_LOG: error, warn, info, debug) ----

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel parse_log_level(const char* s) {
  if (!s) return LogLevel::Warn;
  const std::string v = s;
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

inline LogLevel log_level() {
  static const LogLevel level = parse_log_level(std::getenv("VISAGE_LOG"));
  return level;
}

inline void log(LogLevel l, const std::string& msg) {
  static std::mutex mu;
  if (l > log_level()) return;
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(mu);
  std::cerr << "[visage " << names[int(l)] << "] " << msg << '\n';
}

// ---- base64 (JSON frame uploads) ----

inline std::optional<std::string> base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::string out;
  out.reserve(in.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (char c : in) {
    if (c == '\n' || c == '\r' || c == ' ') continue;
    if (c == '=') {
      ++pad;
      continue;
    }
    if (pad) return std::nullopt;  // data after padding
    const int v = value(c);
    if (v < 0) return std::nullopt;
    acc = (acc << 6) | std::uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(char((acc >> bits) & 0xFF));
    }
  }
  if (pad > 2) return std::nullopt;
  return out;
}

struct ApiSession {
  std::mutex mu;
  std::unique_ptr<Session> session;
  std::uint64_t sequence = 0;                 // frames accepted so far
  std::vector<FeatureVector> pending;         // vectors since the last label call
  std::vector<svm::Sample> pool;              // labeled training vectors
  std::vector<int> pool_groups;               // label call each vector came from
  int label_calls = 0;
  std::optional<TrainReport> last_train;
};

class Service {
 public:
  Service(SessionConfig cfg, Detectors detectors)
      : cfg_(std::move(cfg)), detectors_(std::move(detectors)) {
    cfg_.validate();
    routes();
  }

  httplib::Server& server() { return server_; }

  bool listen(const std::string& host, int port) {
    log(LogLevel::Info, "listening on " + host + ":" + std::to_string(port));
    return server_.listen(host, port);
  }
  // Binds an ephemeral port; returns it (or -1). Call listen_after_bind() next.
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  std::size_t session_count() {
    std::lock_guard lock(map_mu_);
    return sessions_.size();
  }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void reply(Res& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void error(Res& res, int status, const std::string& msg) {
    reply(res, status, Json{{"error", msg}});
  }

  std::shared_ptr<ApiSession> find(const std::string& id) {
    std::lock_guard lock(map_mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  // Looks up the session in the path and runs fn under its lock.
  template <typename Fn>
  void with_session(const Req& req, Res& res, Fn&& fn) {
    const std::string id = req.matches[1];
    auto s = find(id);
    if (!s) return error(res, 404, "unknown session '" + id + "'");
    std::lock_guard lock(s->mu);
    fn(*s);
  }

  SessionConfig session_config(const Req& req, Detectors& det) const {
    SessionConfig cfg = cfg_;
    det = detectors_;
    if (req.body.empty()) return cfg;
    const Json body = Json::parse(req.body);
    if (!body.is_object()) fail(ErrorKind::InvalidInput, "session body must be a JSON object");
    if (body.contains("config")) {
      for (const auto& [k, v] : body["config"].items()) {
        std::string value;
        if (v.is_string()) value = v.get<std::string>();
        else if (v.is_array()) {
          for (std::size_t i = 0; i < v.size(); ++i)
            value += (i ? "," : "") + (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
        } else value = v.dump();
        apply_config_value(cfg, k, value);
      }
      cfg.validate();
      if (body["config"].contains("frontal_cascade") || body["config"].contains("profile_cascade"))
        det = load_detectors(cfg);
    }
    return cfg;
  }

  static Image decode_frame(const Req& req) {
    const std::string type = req.get_header_value("Content-Type");
    if (type.starts_with("application/json")) {
      const Json j = Json::parse(req.body);
      std::string key;
      for (const char* k : {"image", "pgm", "ppm", "data"})
        if (j.contains(k)) key = k;
      if (key.empty() || !j[key].is_string())
        fail(ErrorKind::InvalidInput, "JSON frame needs a base64 \"image\" field");
      const auto bytes = base64_decode(j[key].get<std::string>());
      if (!bytes) fail(ErrorKind::InvalidInput, "invalid base64 frame data");
      return decode_pnm(*bytes);
    }
    return decode_pnm(req.body);
  }

  void routes() {
    server_.Get("/healthz", [this](const Req&, Res& res) {
      reply(res, 200, {{"status", "ok"}, {"sessions", session_count()}});
    });

    server_.Post("/sessions", [this](const Req& req, Res& res) {
      try {
        Detectors det;
        SessionConfig cfg = session_config(req, det);
        auto s = std::make_shared<ApiSession>();
        s->session = std::make_unique<Session>(cfg, std::move(det));
        std::string id;
        {
          std::lock_guard lock(map_mu_);
          id = "s" + std::to_string(++next_id_);
          sessions_[id] = s;
        }
        log(LogLevel::Info, "created session " + id);
        reply(res, 201, {{"id", id}, {"labels", cfg.labels}});
      } catch (const Json::exception& e) {
        error(res, 400, std::string("bad JSON: ") + e.what());
      } catch (const Error& e) {
        error(res, e.kind() == ErrorKind::Io ? 500 : 400, e.what());
      }
    });

    server_.Post(R"(/sessions/([^/]+)/frames)", [this](const Req& req, Res& res) {
      with_session(req, res, [&](ApiSession& s) {
        Image frame;
        try {
          frame = decode_frame(req);
        } catch (const std::exception& e) {
          return error(res, 400, std::string("malformed frame: ") + e.what());
        }
        try {
          const FrameResult r = s.session->process_frame(frame);
          if (r.features) s.pending.push_back(*r.features);
          Json j = to_json(r, s.session->config().labels);
          j["sequence"] = ++s.sequence;
          j["pending_vectors"] = s.pending.size();
          j["initialized"] = s.session->initialized();
          log(LogLevel::Debug, "frame " + std::to_string(s.sequence) + " source " + to_string(r.source));
          reply(res, 200, j);
        } catch (const Error& e) {
          error(res, 400, e.what());
        }
      });
    });

    server_.Post(R"(/sessions/([^/]+)/label)", [this](const Req& req, Res& res) {
      with_session(req, res, [&](ApiSession& s) {
        const auto& cfg = s.session->config();
        std::string name;
        try {
          const Json j = Json::parse(req.body);
          if (j.contains("label") && j["label"].is_string()) name = j["label"].get<std::string>();
          else if (j.contains("label") && j["label"].is_number_integer())
            name = std::to_string(j["label"].get<int>());
        } catch (const Json::exception& e) {
          return error(res, 400, std::string("bad JSON: ") + e.what());
        }
        const auto id = cfg.label_id(name);
        if (!id) return error(res, 400, "unknown label '" + name + "'");
        const int group = s.label_calls++;
        for (const auto& fv : s.pending) {
          s.pool.push_back({fv.as_vector(), *id});
          s.pool_groups.push_back(group);
        }
        const std::size_t added = s.pending.size();
        s.pending.clear();
        reply(res, 200, {{"label", cfg.labels[std::size_t(*id)]},
                         {"added", added},
                         {"pool", pool_counts(s)}});
      });
    });

    server_.Post(R"(/sessions/([^/]+)/train)", [this](const Req& req, Res& res) {
      with_session(req, res, [&](ApiSession& s) {
        const auto& cfg = s.session->config();
        std::vector<int> classes;
        for (const auto& x : s.pool) classes.push_back(x.label);
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        if (classes.size() < 2)
          return error(res, 409, "training needs labeled vectors from at least two classes");
        try {
          TrainReport rep = train_from_samples(s.pool, cfg, s.pool_groups);
          ConfusionMatrix m(cfg.labels.size());
          for (const auto& x : s.pool)
            m.add(std::size_t(x.label), std::size_t(svm::predict(rep.model, x.x).label));
          Json j = to_json(rep, cfg.labels);
          j["training_confusion"] = to_json(m, cfg.labels);
          s.session->set_model(rep.model);
          s.last_train = std::move(rep);
          log(LogLevel::Info, "trained model for session " + std::string(req.matches[1]));
          reply(res, 200, j);
        } catch (const Error& e) {
          error(res, e.kind() == ErrorKind::EmptyTraining ? 409 : 400, e.what());
        }
      });
    });

    server_.Get(R"(/sessions/([^/]+)/model)", [this](const Req& req, Res& res) {
      with_session(req, res, [&](ApiSession& s) {
        const auto& m = s.session->model();
        if (!m) return error(res, 404, "session has no trained model");
        res.status = 200;
        res.set_content(svm::model_to_string(*m), "text/plain");
      });
    });

    server_.Get(R"(/sessions/([^/]+)/model/range)", [this](const Req& req, Res& res) {
      with_session(req, res, [&](ApiSession& s) {
        const auto& m = s.session->model();
        if (!m) return error(res, 404, "session has no trained model");
        std::ostringstream out;
        svm::write_range(out, m->scaling);
        res.status = 200;
        res.set_content(out.str(), "text/plain");
      });
    });

    server_.Post(R"(/sessions/([^/]+)/reset-reference)", [this](const Req& req, Res& res) {
      with_session(req, res, [&](ApiSession& s) {
        s.session->reset_reference();
        s.pending.clear();
        reply(res, 200, {{"initialized", false}});
      });
    });

    server_.set_exception_handler([](const Req&, Res& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        log(LogLevel::Error, e.what());
        error(res, 500, e.what());
      } catch (...) {
        error(res, 500, "unknown error");
      }
    });
  }

  static Json pool_counts(const ApiSession& s) {
    const auto& labels = s.session->config().labels;
    Json j = Json::object();
    for (const auto& l : labels) j[l] = 0;
    for (const auto& x : s.pool) j[labels[std::size_t(x.label)]] = j[labels[std::size_t(x.label)]].get<int>() + 1;
    return j;
  }

  SessionConfig cfg_;
  Detectors detectors_;
  httplib::Server server_;
  std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<ApiSession>> sessions_;
  std::uint64_t next_id_ = 0;
};

}  // namespace visage
