#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>

// HTTP service for the interactive loop: upload a volume, browse slices,
// accumulate seed strokes, run the automaton in the background, post-edit and
// read back volumes. Endpoints are documented in docs/http_api.md.
namespace seedseg::server {

struct ServerOptions {
    // Sessions untouched for this long are dropped (never while a job runs).
    std::chrono::seconds idle_timeout{30 * 60};
    // Largest accepted request body.
    std::size_t max_upload_bytes = std::size_t{1} << 30;
};

class SegServer {
  public:
    explicit SegServer(ServerOptions options = {});
    ~SegServer();
    SegServer(const SegServer&) = delete;
    SegServer& operator=(const SegServer&) = delete;

    /// Binds and serves until stop(); returns false if binding failed.
    bool listen(const std::string& host, int port);
    /// Binds to a free port and returns it (-1 on failure); serve with
    /// listen_after_bind() on another thread.
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

    /// Drops sessions idle longer than the timeout; returns how many.
    std::size_t evict_idle();
    std::size_t session_count() const;

    /// Called on the job thread right before the automaton starts. Tests use
    /// it to hold a job in the running state.
    void set_job_hook(std::function<void()> hook);

  private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

} // namespace seedseg::server
