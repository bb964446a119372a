#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "deadnet/annotate.hpp"

namespace deadnet {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 binds any free port
    double train_fraction = kDefaultExportTrainFraction;
    std::uint64_t export_seed = 0;
    std::filesystem::path static_dir;  // optional UI bundle mounted at /
};

// JSON over HTTP:
//   GET  /api/next?annotator=ID
//   GET  /api/sequence/{id}/frame/{0..9}
//   POST /api/annotate
//   GET  /api/concordance
//   GET  /api/export[?seed=S&train_fraction=F]
class AnnotateServer {
public:
    AnnotateServer(AnnotationStore& store, ServerOptions options);
    ~AnnotateServer();
    AnnotateServer(const AnnotateServer&) = delete;
    AnnotateServer& operator=(const AnnotateServer&) = delete;

    /// Binds and returns the port actually bound.
    int bind();
    /// Serves until stop(); call bind() first.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace deadnet
