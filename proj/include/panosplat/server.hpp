#pragma once

// HTTP front end for a trained scene:
//   GET /scene/meta  scene metadata (JSON)
//   GET /render      ?qw&qx&qy&qz&tx&ty&tz&h&w[&format=png|jpeg][&quality] -> encoded panorama
//   GET /*           static files from the web root, when one is configured
// Malformed requests get 400 with a JSON {"error": ...} body.

#include "panosplat/checkpoint.hpp"

#include <memory>
#include <string>

namespace panosplat {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080; ///< 0 picks a free port
    std::string web_root;
    /// Connection threads; each render also uses the scene's render workers.
    int threads = 2;
};

class SceneServer {
public:
    SceneServer(Checkpoint ckpt, RenderSettings settings, ServerOptions opt);
    ~SceneServer();
    SceneServer(const SceneServer&) = delete;
    SceneServer& operator=(const SceneServer&) = delete;

    /// Binds the socket and returns the bound port. Throws IoError on failure.
    int bind();
    /// Serves until stop() is called. Requires bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace panosplat
