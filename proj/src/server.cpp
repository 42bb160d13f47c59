#include "panosplat/server.hpp"

#include "panosplat/error.hpp"
#include "panosplat/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

namespace panosplat {

struct SceneServer::Impl {
    Checkpoint ckpt;
    RenderSettings settings;
    ServerOptions opt;
    std::string meta;
    httplib::Server http;
    int port = -1;
    std::mutex mutex;
    bool stop_requested = false;
    std::atomic<bool> listening{false};
};

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

} // namespace

SceneServer::SceneServer(Checkpoint ckpt, RenderSettings settings, ServerOptions opt)
    : impl_(std::make_unique<Impl>()) {
    impl_->ckpt = std::move(ckpt);
    impl_->settings = settings;
    impl_->opt = std::move(opt);
    impl_->meta = scene_meta(impl_->ckpt).dump();
    Impl* self = impl_.get();

    const int threads = std::max(1, self->opt.threads);
    self->http.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };

    self->http.Get("/scene/meta", [self](const httplib::Request&, httplib::Response& res) {
        res.set_content(self->meta, "application/json");
    });

    self->http.Get("/render", [self](const httplib::Request& req, httplib::Response& res) {
        const auto t0 = std::chrono::steady_clock::now();
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) {
            if (!query.emplace(k, v).second) {
                reply_error(res, 400, "duplicate parameter '" + k + "'");
                return;
            }
        }
        RenderRequest r;
        try {
            r = parse_render_request(query);
        } catch (const InvalidParameterError& e) {
            spdlog::info("GET /render 400: {}", e.what());
            reply_error(res, 400, e.what());
            return;
        }
        res.set_content(render_frame(self->ckpt.state.scene, r, self->settings), mime_type(r.format));
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        spdlog::info("GET /render {}x{} {} bytes in {:.1f} ms", r.width, r.height, res.body.size(), ms);
    });

    self->http.set_exception_handler([](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        spdlog::error("{} {}: {}", req.method, req.path, message);
        reply_error(res, 500, message);
    });

    if (!self->opt.web_root.empty() && !self->http.set_mount_point("/", self->opt.web_root))
        throw IoError(self->opt.web_root + ": web root is not a directory");
}

SceneServer::~SceneServer() { stop(); }

int SceneServer::bind() {
    Impl& s = *impl_;
    if (s.opt.port == 0) {
        s.port = s.http.bind_to_any_port(s.opt.host);
    } else {
        s.port = s.http.bind_to_port(s.opt.host, s.opt.port) ? s.opt.port : -1;
    }
    if (s.port < 0) throw IoError("cannot bind " + s.opt.host + ":" + std::to_string(s.opt.port));
    return s.port;
}

void SceneServer::listen() {
    Impl& s = *impl_;
    if (s.port < 0) throw Error("SceneServer::listen called before bind");
    {
        const std::lock_guard lock(s.mutex);
        if (s.stop_requested) return;
        s.listening = true;
    }
    s.http.listen_after_bind();
    s.listening = false;
}

void SceneServer::stop() {
    if (!impl_) return;
    Impl& s = *impl_;
    {
        const std::lock_guard lock(s.mutex);
        s.stop_requested = true;
    }
    // A listen() that has started but not yet entered its accept loop would miss the stop.
    while (s.listening && !s.http.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    s.http.stop();
}

} // namespace panosplat
