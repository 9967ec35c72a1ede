#include <httplib.h>

#include "cesoforge/corpus.hpp"

namespace cesoforge::corpus {

std::string http_fetch(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::fetch_failure, "not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const auto origin = url.substr(0, path_start);
    const auto path = path_start == std::string::npos ? std::string("/") : url.substr(path_start);

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.rfind("https://", 0) == 0) {
        throw Error(Errc::fetch_failure, "https unsupported in this build: " + url);
    }
#endif
    httplib::Client client(origin);
    client.set_connection_timeout(5);
    client.set_read_timeout(15);
    client.set_follow_location(true);
    auto res = client.Get(path);
    if (!res) {
        throw Error(Errc::fetch_failure, url + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(Errc::fetch_failure, url + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
}

}  // namespace cesoforge::corpus
