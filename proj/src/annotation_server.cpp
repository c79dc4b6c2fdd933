#include "cqasim/annotation_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace cqasim::annotation {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message)
{
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req)
{
    try {
        auto body = json::parse(req.body);
        if (!body.is_object())
            throw ServiceError(400, "bad_request", "request body must be a JSON object");
        return body;
    } catch (const json::parse_error& e) {
        throw ServiceError(400, "bad_request", std::string("invalid JSON: ") + e.what());
    }
}

std::string required_string(const json& body, const char* key)
{
    if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty())
        throw ServiceError(400, "bad_request", std::string("missing field '") + key + "'");
    return body[key].get<std::string>();
}

} // namespace

struct AnnotationServer::Impl {
    AnnotationStore& store;
    ServerConfig config;
    httplib::Server http;

    Impl(AnnotationStore& s, ServerConfig c)
        : store(s)
        , config(std::move(c))
    {
        routes();
    }

    // Wraps a handler so ServiceError and friends become structured bodies.
    template <typename F>
    httplib::Server::Handler guarded(F f)
    {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const ServiceError& e) {
                send_error(res, e.status(), e.code(), e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "bad_request", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    void require_admin(const httplib::Request& req) const
    {
        if (config.admin_token.empty())
            throw ServiceError(403, "forbidden", "privileged endpoints are disabled");
        std::string given = req.get_header_value("X-Admin-Token");
        const auto auth = req.get_header_value("Authorization");
        if (given.empty() && auth.rfind("Bearer ", 0) == 0)
            given = auth.substr(7);
        if (given != config.admin_token)
            throw ServiceError(403, "forbidden", "admin token required");
    }

    std::vector<Judgment> batch_from(const json& body)
    {
        const auto annotator = required_string(body, "annotator");
        const auto task_id = required_string(body, "task_id");
        std::vector<Judgment> out;
        for (const auto& jj : body.value("judgments", json::array())) {
            auto rec = jj;
            rec["annotator"] = annotator;
            rec["task_id"] = task_id;
            out.push_back(judgment_from_json(rec));
        }
        if (body.contains("preference")) {
            auto rec = body["preference"];
            if (!rec.is_object())
                throw ServiceError(400, "bad_request", "preference must be an object");
            rec["annotator"] = annotator;
            rec["task_id"] = task_id;
            rec["aspect"] = "preference";
            rec["item"] = nullptr;
            out.push_back(judgment_from_json(rec));
        }
        if (out.empty())
            throw ServiceError(400, "bad_request", "submission contains no judgments");
        return out;
    }

    void routes()
    {
        http.Get("/api/tasks", guarded([this](const httplib::Request&, httplib::Response& res) {
                     json out = json::array();
                     for (const auto& t : store.tasks())
                         out.push_back({{"id", t.id}, {"items", t.items.size()}});
                     send_json(res, 200, out);
                 }));

        http.Get("/api/tasks/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto annotator = req.get_param_value("annotator");
                     if (annotator.empty())
                         throw ServiceError(400, "bad_request", "annotator query parameter required");
                     const auto* t = store.next_task(annotator);
                     if (!t) {
                         send_json(res, 200, {{"task", nullptr}});
                         return;
                     }
                     send_json(res, 200, {{"task", blinded_json(*t)}});
                 }));

        http.Get("/api/tasks/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto* t = store.task(req.path_params.at("id"));
                     if (!t)
                         throw ServiceError(404, "unknown_task", "no such task");
                     send_json(res, 200, blinded_json(*t));
                 }));

        http.Get("/api/onboarding", guarded([this](const httplib::Request&, httplib::Response& res) {
                     send_json(res, 200, store.quiz().public_json());
                 }));

        http.Post("/api/onboarding", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = parse_body(req);
                      const auto annotator = required_string(body, "annotator");
                      std::vector<std::string> responses;
                      const auto r = body.value("responses", json::array());
                      if (r.is_array()) {
                          responses = r.get<std::vector<std::string>>();
                      } else if (r.is_object()) {
                          for (const auto& q : store.quiz().questions)
                              responses.push_back(r.contains(q.id) ? r[q.id].get<std::string>() : std::string{});
                      } else {
                          throw ServiceError(400, "bad_request", "responses must be an array or object");
                      }
                      const auto o = store.submit_onboarding(annotator, responses);
                      send_json(res, 200,
                                {{"passed", o.passed},
                                 {"correct", o.correct},
                                 {"total", o.total},
                                 {"attempts", o.attempts}});
                  }));

        http.Post("/api/judgments", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      auto j = store.submit(judgment_from_json(parse_body(req)));
                      send_json(res, 201, {{"sequence", j.sequence}});
                  }));

        http.Post("/api/submissions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto stored = store.submit_batch(batch_from(parse_body(req)));
                      json seqs = json::array();
                      for (const auto& j : stored)
                          seqs.push_back(j.sequence);
                      send_json(res, 201, {{"sequences", seqs}});
                  }));

        http.Get("/api/report", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     require_admin(req);
                     send_json(res, 200,
                               aggregate_to_json(store.report(config.min_annotators), config.system1_name,
                                                 config.system2_name));
                 }));

        http.Get("/api/judgments/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     require_admin(req);
                     res.status = 200;
                     res.set_content(store.export_jsonl(), "application/x-ndjson");
                 }));

        http.Post("/api/judgments/:seq/flag", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      require_admin(req);
                      std::uint64_t seq = 0;
                      try {
                          seq = std::stoull(req.path_params.at("seq"));
                      } catch (const std::exception&) {
                          throw ServiceError(400, "bad_request", "judgment sequence must be a number");
                      }
                      std::string reason;
                      if (!req.body.empty())
                          reason = parse_body(req).value("reason", std::string{});
                      store.flag(seq, reason);
                      send_json(res, 200, {{"flagged", seq}});
                  }));
    }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerConfig config)
    : impl_(std::make_unique<Impl>(store, std::move(config)))
{
}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind(const std::string& host, int port)
{
    if (port == 0)
        return impl_->http.bind_to_any_port(host);
    return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool AnnotationServer::listen_after_bind() { return impl_->http.listen_after_bind(); }

void AnnotationServer::stop() { impl_->http.stop(); }

void AnnotationServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

} // namespace cqasim::annotation
