#include "hybridaug/error.hpp"
#include "hybridaug/gallery.hpp"

#include <httplib.h>

namespace hybridaug::gallery {

struct Server::Impl {
    Session& session;
    httplib::Server http;

    explicit Impl(Session& s) : session(s) {
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            std::string target = req.path;
            if (!req.params.empty()) {
                char sep = '?';
                for (const auto& [k, v] : req.params) {
                    target += sep + k + "=" + v;
                    sep = '&';
                }
            }
            const Response r = session.handle(req.method, target, req.body);
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        // The library default adds SO_REUSEPORT, which lets a second server
        // silently share a port that is already in use.
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        http.Get(R"(/.*)", route);
        http.Post(R"(/.*)", route);
        http.Put(R"(/.*)", route);
        http.Delete(R"(/.*)", route);
    }
};

Server::Server(Session& session) : impl_(std::make_unique<Impl>(session)) {}
Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->http.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host + ":0");
        return bound;
    }
    if (!impl_->http.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
    if (impl_) impl_->http.stop();
}

}  // namespace hybridaug::gallery
