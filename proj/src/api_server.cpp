#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "upho/api.hpp"
#include "upho/error.hpp"
#include "upho/pipeline.hpp"

// after Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen parameter names
#include "httplib.h"

namespace upho::api {

namespace {

thread_local std::chrono::steady_clock::time_point request_start;

catalog::Catalog repo_catalog(const std::filesystem::path& root) {
    const auto path = pipeline::staging_catalog_path(root);
    if (!std::filesystem::exists(path)) {
        return catalog::builtin_catalog();
    }
    std::ifstream in(path);
    return catalog::read_catalog_csv(in);
}

}  // namespace

int serve(const ServeOptions& options, std::ostream& log) {
    std::mutex log_mutex;
    auto say = [&](const std::string& line) {
        std::lock_guard lock(log_mutex);
        log << line << std::endl;
    };

    const auto colon = options.bind.rfind(':');
    int port = -1;
    if (colon != std::string::npos) {
        try {
            port = std::stoi(options.bind.substr(colon + 1));
        } catch (const std::exception&) {
            port = -1;
        }
    }
    if (colon == std::string::npos || port < 0 || port > 65535) {
        say("error: --bind must be host:port, got '" + options.bind + "'");
        return 4;
    }
    const std::string host = options.bind.substr(0, colon);

    std::optional<Service> service;
    try {
        auto auth = read_auth_file(options.auth);
        service.emplace(repo::Reader(options.repo), repo_catalog(options.repo), std::move(auth));
    } catch (const std::exception& ex) {
        say(std::string("error: ") + ex.what());
        return 4;
    }

    httplib::Server server;
    if (options.app) {
        if (!server.set_mount_point("/app", options.app->string())) {
            say("error: cannot mount " + options.app->string());
            return 4;
        }
    }
    auto handler = [&](const httplib::Request& req, httplib::Response& res) {
        Request r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) {
            r.query.emplace(k, v);
        }
        if (req.has_header("Authorization")) {
            r.authorization = req.get_header_value("Authorization");
        }
        const auto out = service->handle(r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
    server.Patch(".*", handler);
    server.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
        request_start = std::chrono::steady_clock::now();
        return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_logger([&](const httplib::Request& req, const httplib::Response& res) {
        const auto ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - request_start).count();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", ms);
        say(req.method + " " + req.path + " " + std::to_string(res.status) + " " + buf + "ms");
    });

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGUSR1);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);

    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        say("error: cannot bind " + options.bind);
        return 4;
    }
    say("listening on " + host + ":" + std::to_string(bound));

    std::atomic<bool> stopping{false};
    std::thread listener([&] {
        server.listen_after_bind();
        if (!stopping) {
            ::kill(::getpid(), SIGUSR1);
        }
    });
    int received = 0;
    sigwait(&signals, &received);
    stopping = true;
    server.stop();
    listener.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    if (received == SIGUSR1) {
        say("error: listener stopped unexpectedly");
        return 4;
    }
    say("shutting down");
    return 0;
}

}  // namespace upho::api
