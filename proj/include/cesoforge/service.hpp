#pragma once

// Local HTTP/JSON service over the pipeline operations.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "cesoforge/app.hpp"
#include "cesoforge/errors.hpp"

namespace httplib {
class Server;
}

namespace cesoforge::service {

/// 400 validation, 404 unknown id, 409 conflict, 500 internal.
int http_status(Errc code) noexcept;
/// `{"code": "NotFound", "message": ...}`
nlohmann::json error_body(std::string_view code, std::string_view message);

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8787;
    std::optional<std::filesystem::path> ui_dir;  // mounted at /ui when present
};

/// Registers every /api route (and /ui when configured) on `server`.
void install_routes(httplib::Server& server, app::App& app, const ServeOptions& options = {});

/// Blocks until `stop()` is called on the server or the process is signalled.
/// Throws IoFailure when the address cannot be bound.
void serve(app::App& app, const ServeOptions& options);

}  // namespace cesoforge::service
