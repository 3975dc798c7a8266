#pragma once

#include <sys/wait.h>
#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "upho/frame.hpp"
#include "upho/geo.hpp"

namespace upho::test_support {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "upho-test-XXXXXX").string();
        if (!::mkdtemp(pattern.data())) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const fs::path& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline geo::Polygon square(double lon, double lat, double size) {
    return {{{lon, lat}, {lon + size, lat}, {lon + size, lat + size}, {lon, lat + size}, {lon, lat}}, {}};
}

/// rows x cols square cells of `size` degrees; ids "u<row><col>" zero-padded,
/// row-major from the south-west corner.
inline std::vector<geo::GeoUnit> grid_units(int rows, int cols, double size = 0.01, double lon0 = -90.0,
                                            double lat0 = 35.0, geo::Level level = geo::Level::Tract) {
    std::vector<geo::GeoUnit> out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            char id[32];
            std::snprintf(id, sizeof id, "u%02d%02d", r, c);
            out.emplace_back(id, level, std::vector<geo::Polygon>{square(lon0 + c * size, lat0 + r * size, size)});
        }
    }
    return out;
}

inline std::vector<geo::GeoPoint> centroids(const std::vector<geo::GeoUnit>& units) {
    std::vector<geo::GeoPoint> out;
    for (const auto& u : units) {
        out.push_back(u.centroid());
    }
    return out;
}

inline AnalysisFrame make_frame(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    AnalysisFrame f;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        f.unit_ids.push_back("u" + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        f.predictor_keys.push_back("x" + std::to_string(j + 1));
    }
    f.X = X;
    f.y = y;
    f.outcome = "tests";
    return f;
}

struct ProcessResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

/// Runs argv[0] with the given arguments, capturing combined output.
inline ProcessResult run_process(const std::vector<std::string>& argv) {
    int fds[2];
    if (::pipe(fds) != 0) {
        throw std::runtime_error("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid == 0) {
        ::dup2(fds[1], STDOUT_FILENO);
        ::dup2(fds[1], STDERR_FILENO);
        ::close(fds[0]);
        ::close(fds[1]);
        std::vector<char*> args;
        for (const auto& a : argv) {
            args.push_back(const_cast<char*>(a.c_str()));
        }
        args.push_back(nullptr);
        ::execv(args[0], args.data());
        ::_exit(127);
    }
    ::close(fds[1]);
    ProcessResult out;
    char buf[4096];
    for (ssize_t got; (got = ::read(fds[0], buf, sizeof buf)) > 0;) {
        out.output.append(buf, static_cast<std::size_t>(got));
    }
    ::close(fds[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

/// Child process with its combined output readable line by line.
class Spawned {
public:
    explicit Spawned(const std::vector<std::string>& argv) {
        int fds[2];
        if (::pipe(fds) != 0) {
            throw std::runtime_error("pipe failed");
        }
        pid_ = ::fork();
        if (pid_ == 0) {
            ::dup2(fds[1], STDOUT_FILENO);
            ::dup2(fds[1], STDERR_FILENO);
            ::close(fds[0]);
            ::close(fds[1]);
            std::vector<char*> args;
            for (const auto& a : argv) {
                args.push_back(const_cast<char*>(a.c_str()));
            }
            args.push_back(nullptr);
            ::execv(args[0], args.data());
            ::_exit(127);
        }
        ::close(fds[1]);
        fd_ = fds[0];
    }
    ~Spawned() {
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            wait();
        }
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }
    Spawned(const Spawned&) = delete;
    Spawned& operator=(const Spawned&) = delete;

    /// Next output line without the newline; empty at end of output.
    std::string read_line() {
        std::string line;
        char c;
        while (::read(fd_, &c, 1) == 1 && c != '\n') {
            line.push_back(c);
        }
        return line;
    }

    void signal(int sig) { ::kill(pid_, sig); }

    /// Exit status, or -1 when killed by a signal.
    int wait() {
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

private:
    pid_t pid_ = -1;
    int fd_ = -1;
};

}  // namespace upho::test_support
