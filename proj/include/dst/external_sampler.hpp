#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dst/sampler.hpp"

namespace dst {

/// Where the forecasting service lives: a command spawned with its
/// standard streams as the channel, or a TCP address when port > 0.
struct ExternalEndpoint {
    std::vector<std::string> command;
    std::string host = "127.0.0.1";
    int port = 0;
    double timeout_seconds = 120.0;

    friend bool operator==(const ExternalEndpoint&, const ExternalEndpoint&) = default;
};

/// Trajectory sampler served over newline-delimited JSON.
///
///   {"op":"hello"}                                      -> {"name","d","min_context"}
///   {"op":"sample","history":[[..]],"m","h","seed"}    -> {"samples":[[[..]]],"shape":[m,h,d]}
///                                                       or {"error":"..."}
///
/// One channel carries one request at a time; clone() opens a new session.
/// Malformed replies raise ProtocolError, {"error"} replies RemoteError and
/// a silent service TimeoutError, after which the channel is closed.
class ExternalSampler final : public TrajectorySampler {
public:
    /// Opens the channel and performs the handshake.
    explicit ExternalSampler(ExternalEndpoint endpoint);
    ~ExternalSampler() override;

    ExternalSampler(const ExternalSampler&) = delete;
    ExternalSampler& operator=(const ExternalSampler&) = delete;

    std::string name() const override { return "external:" + remote_name_; }
    std::size_t dim() const override { return dim_; }
    std::size_t min_context() const override { return min_context_; }
    bool thread_safe() const override { return false; }
    std::unique_ptr<TrajectorySampler> clone() const override;
    TrajectoryBatch sample(const SamplerRequest& req) const override;

    const std::string& remote_name() const { return remote_name_; }
    const ExternalEndpoint& endpoint() const { return endpoint_; }

private:
    class Channel;

    ExternalEndpoint endpoint_;
    std::unique_ptr<Channel> channel_;
    mutable std::mutex mutex_;
    std::string remote_name_;
    std::size_t dim_ = 0;
    std::size_t min_context_ = 1;
};

/// Request line for `req` (no trailing newline).
std::string encode_sample_request(const SamplerRequest& req);

/// Parses one reply line against the expected shape.
TrajectoryBatch decode_sample_response(const std::string& line, std::size_t m, std::size_t h,
                                       std::size_t d);

}  // namespace dst
