#pragma once

#include "cqasim/annotation.hpp"

#include <memory>
#include <string>

namespace cqasim::annotation {

struct ServerConfig {
    /// Bearer token for the report, export and flag endpoints. Empty
    /// disables them.
    std::string admin_token;
    std::string system1_name = "system1";
    std::string system2_name = "system2";
    std::size_t min_annotators = 3;
};

/// HTTP front end over an AnnotationStore.
///
///   GET  /api/tasks                      task ids and item counts
///   GET  /api/tasks/next?annotator=X     next unfinished task (blinded)
///   GET  /api/tasks/{id}                 one task (blinded)
///   GET  /api/onboarding                 quiz without answers
///   POST /api/onboarding                 {annotator, responses}
///   POST /api/judgments                  one judgment
///   POST /api/submissions                a whole task at once, atomically
///   GET  /api/report                     aggregate (admin)
///   GET  /api/judgments/export           JSON lines (admin)
///   POST /api/judgments/{seq}/flag       exclude from aggregates (admin)
class AnnotationServer {
public:
    AnnotationServer(AnnotationStore& store, ServerConfig config);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds and returns the port (an ephemeral one when `port` is 0), or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace cqasim::annotation
