#include "dst/external_sampler.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <spawn.h>
#include <sstream>
#include <sys/socket.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "json.hpp"

#include "dst/common.hpp"

extern char** environ;

namespace dst {

using json = nlohmann::json;

class ExternalSampler::Channel {
public:
    explicit Channel(const ExternalEndpoint& ep) : timeout_(ep.timeout_seconds) {
        // a vanished peer should surface as an error, not kill the process
        std::signal(SIGPIPE, SIG_IGN);
        if (ep.port > 0) {
            connect_tcp(ep.host, ep.port);
        } else {
            spawn(ep.command);
        }
    }

    ~Channel() { close_all(); }

    std::string exchange(const std::string& line) {
        if (broken_) {
            throw ProtocolError("sampler channel is closed after an earlier failure");
        }
        try {
            write_line(line);
            return read_line();
        } catch (...) {
            broken_ = true;
            close_all();
            throw;
        }
    }

private:
    void spawn(const std::vector<std::string>& command) {
        if (command.empty()) {
            throw InvalidInput("external sampler: empty command");
        }
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0) {
            throw SamplerError(std::string("pipe: ") + std::strerror(errno));
        }
        if (pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw SamplerError(std::string("pipe: ") + std::strerror(errno));
        }
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
        posix_spawn_file_actions_addclose(&actions, to_child[1]);
        posix_spawn_file_actions_addclose(&actions, from_child[0]);

        std::vector<char*> argv;
        for (const auto& a : command) {
            argv.push_back(const_cast<char*>(a.c_str()));
        }
        argv.push_back(nullptr);
        const int rc = posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(to_child[0]);
        ::close(from_child[1]);
        if (rc != 0) {
            ::close(to_child[1]);
            ::close(from_child[0]);
            pid_ = -1;
            throw SamplerError("cannot start '" + command.front() + "': " + std::strerror(rc));
        }
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
        fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
    }

    void connect_tcp(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const std::string service = std::to_string(port);
        if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
            throw SamplerError("cannot resolve " + host);
        }
        int fd = -1;
        for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
            fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
            if (fd < 0) {
                continue;
            }
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                break;
            }
            ::close(fd);
            fd = -1;
        }
        freeaddrinfo(res);
        if (fd < 0) {
            throw SamplerError("cannot connect to " + host + ":" + service);
        }
        read_fd_ = fd;
        write_fd_ = fd;
        socket_ = true;
    }

    double remaining(std::chrono::steady_clock::time_point deadline) const {
        return std::chrono::duration<double>(deadline - std::chrono::steady_clock::now()).count();
    }

    void write_line(const std::string& line) {
        std::string data = line + "\n";
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double>(timeout_));
        std::size_t off = 0;
        while (off < data.size()) {
            pollfd p{write_fd_, POLLOUT, 0};
            const double left = remaining(deadline);
            if (left <= 0.0) {
                throw TimeoutError("sampler did not accept the request within " +
                                   format_double(timeout_, 1) + " s");
            }
            const int ready = ::poll(&p, 1, static_cast<int>(left * 1000.0) + 1);
            if (ready < 0 && errno == EINTR) {
                continue;
            }
            if (ready == 0) {
                continue;
            }
            const ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                      : ::write(write_fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) {
                    continue;
                }
                throw ProtocolError(std::string("sampler channel write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double>(timeout_));
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') {
                    line.pop_back();
                }
                return line;
            }
            const double left = remaining(deadline);
            if (left <= 0.0) {
                throw TimeoutError("no reply from sampler within " + format_double(timeout_, 1) + " s");
            }
            pollfd p{read_fd_, POLLIN, 0};
            const int ready = ::poll(&p, 1, static_cast<int>(left * 1000.0) + 1);
            if (ready < 0) {
                if (errno == EINTR) {
                    continue;
                }
                throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (ready == 0) {
                continue;
            }
            char chunk[65536];
            const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) {
                    continue;
                }
                throw ProtocolError(std::string("sampler channel read failed: ") + std::strerror(errno));
            }
            if (n == 0) {
                throw ProtocolError("sampler closed the channel");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void close_all() {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) {
            ::close(write_fd_);
        }
        if (read_fd_ >= 0) {
            ::close(read_fd_);
        }
        write_fd_ = read_fd_ = -1;
        if (pid_ > 0) {
            // closed stdin asks the service to exit; give it a moment
            int status = 0;
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid_, &status, WNOHANG) == pid_) {
                    pid_ = -1;
                    return;
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
            }
            ::kill(pid_, SIGKILL);
            waitpid(pid_, &status, 0);
            pid_ = -1;
        }
    }

    double timeout_;
    int read_fd_ = -1;
    int write_fd_ = -1;
    bool socket_ = false;
    bool broken_ = false;
    pid_t pid_ = -1;
    std::string buffer_;
};

namespace {

json parse_reply(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("reply is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ProtocolError("reply is not a JSON object");
    }
    if (j.contains("error")) {
        const auto& e = j["error"];
        throw RemoteError("sampler error: " + (e.is_string() ? e.get<std::string>() : e.dump()));
    }
    return j;
}

std::size_t count_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0) {
        throw ProtocolError(std::string("handshake field '") + key + "' missing or not a count");
    }
    return j[key].get<std::size_t>();
}

}  // namespace

std::string encode_sample_request(const SamplerRequest& req) {
    std::ostringstream out;
    out << "{\"op\":\"sample\",\"history\":[";
    for (std::size_t r = 0; r < req.history.rows(); ++r) {
        out << (r ? ",[" : "[");
        for (std::size_t c = 0; c < req.history.cols(); ++c) {
            out << (c ? "," : "") << format_double(req.history(r, c), 17, 'g');
        }
        out << "]";
    }
    out << "],\"m\":" << req.m << ",\"h\":" << req.h << ",\"seed\":" << req.seed << "}";
    return out.str();
}

TrajectoryBatch decode_sample_response(const std::string& line, std::size_t m, std::size_t h,
                                       std::size_t d) {
    const json j = parse_reply(line);
    if (!j.contains("samples") || !j.contains("shape")) {
        throw ProtocolError("reply lacks 'samples' or 'shape'");
    }
    const auto& shape = j["shape"];
    if (!shape.is_array() || shape.size() != 3 || !shape[0].is_number_integer() ||
        !shape[1].is_number_integer() || !shape[2].is_number_integer()) {
        throw ProtocolError("reply shape is not three integers");
    }
    if (shape[0].get<long long>() != static_cast<long long>(m) ||
        shape[1].get<long long>() != static_cast<long long>(h) ||
        shape[2].get<long long>() != static_cast<long long>(d)) {
        throw ProtocolError("reply shape " + shape.dump() + " does not match request (" + std::to_string(m) +
                            "," + std::to_string(h) + "," + std::to_string(d) + ")");
    }
    const auto& samples = j["samples"];
    if (!samples.is_array() || samples.size() != m) {
        throw ProtocolError("reply carries " + std::to_string(samples.is_array() ? samples.size() : 0) +
                            " samples, shape says " + std::to_string(m));
    }
    TrajectoryBatch batch(m, h, d);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& s = samples[i];
        if (!s.is_array() || s.size() != h) {
            throw ProtocolError("sample " + std::to_string(i) + " does not have " + std::to_string(h) + " steps");
        }
        for (std::size_t t = 0; t < h; ++t) {
            const auto& row = s[t];
            if (!row.is_array() || row.size() != d) {
                throw ProtocolError("sample " + std::to_string(i) + " step " + std::to_string(t) +
                                    " does not have " + std::to_string(d) + " values");
            }
            for (std::size_t k = 0; k < d; ++k) {
                if (!row[k].is_number()) {
                    throw ProtocolError("non-numeric value in sample " + std::to_string(i));
                }
                batch.at(i, t, k) = row[k].get<double>();
            }
        }
    }
    validate_batch(batch, m, h, d);
    return batch;
}

ExternalSampler::ExternalSampler(ExternalEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (!(endpoint_.timeout_seconds > 0.0)) {
        throw InvalidInput("external sampler: timeout must be positive");
    }
    channel_ = std::make_unique<Channel>(endpoint_);
    const json hello = parse_reply(channel_->exchange("{\"op\":\"hello\"}"));
    if (!hello.contains("name") || !hello["name"].is_string()) {
        throw ProtocolError("handshake lacks a name");
    }
    remote_name_ = hello["name"].get<std::string>();
    dim_ = count_field(hello, "d");
    min_context_ = count_field(hello, "min_context");
    if (dim_ == 0) {
        throw ProtocolError("handshake reports zero dimensions");
    }
}

ExternalSampler::~ExternalSampler() = default;

std::unique_ptr<TrajectorySampler> ExternalSampler::clone() const {
    return std::make_unique<ExternalSampler>(endpoint_);
}

TrajectoryBatch ExternalSampler::sample(const SamplerRequest& req) const {
    validate_request(req, dim_, min_context_);
    std::lock_guard<std::mutex> lock(mutex_);
    const std::string reply = channel_->exchange(encode_sample_request(req));
    return decode_sample_response(reply, req.m, req.h, dim_);
}

}  // namespace dst
