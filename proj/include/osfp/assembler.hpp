#pragma once

#include "osfp/capture.hpp"
#include "osfp/pseudonym.hpp"
#include "osfp/session.hpp"
#include "osfp/wire.hpp"

#include <cstdint>
#include <map>
#include <queue>
#include <span>
#include <vector>

#include <json.hpp>

namespace osfp {

struct AssemblerOptions {
    WireOptions wire;
    /// Sessions idle longer than this (seconds) are flushed.
    double idle_timeout = 300.0;
    /// Packets up to this many seconds out of capture order are re-sorted.
    double reorder_window = 5.0;
    /// Client payload bytes buffered while waiting for a complete
    /// ClientHello or request header.
    std::size_t max_payload_buffer = 16 * 1024;
};

struct ExtractCounters {
    std::uint64_t packets = 0;
    std::uint64_t tcp_packets = 0;
    std::uint64_t sessions = 0;
    std::uint64_t malformed_packets = 0;
    std::uint64_t malformed_tcp = 0;
    std::uint64_t malformed_tls = 0;
    std::uint64_t malformed_http = 0;
    std::uint64_t unsupported_link = 0;
    std::uint64_t truncated_captures = 0;

    nlohmann::ordered_json to_json() const;
    ExtractCounters& operator+=(const ExtractCounters& o);
};

/// Turns a time-ordered packet stream into session records keyed by the
/// client-initiated 5-tuple. The first SYN, ClientHello and HTTP request of
/// each connection supply its fingerprints; sessions without a SYN are kept
/// if TLS or HTTP evidence is seen.
class SessionAssembler {
public:
    SessionAssembler(PseudonymKey key, AssemblerOptions opts = {});

    /// Feeds one packet; completed sessions are appended to `out`.
    void push(CapturedPacket packet, std::vector<SessionRecord>& out);
    /// Drains the reorder buffer and flushes every open session.
    void finish(std::vector<SessionRecord>& out);

    const ExtractCounters& counters() const noexcept { return counters_; }

private:
    struct FlowKey {
        IpAddress client;
        IpAddress server;
        std::uint16_t client_port;
        std::uint16_t server_port;
        friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
    };

    enum class PayloadState { waiting, buffering_tls, buffering_http, done };

    struct Flow {
        double start_time = 0.0;
        double last_seen = 0.0;
        bool saw_syn = false;
        std::optional<std::uint32_t> next_seq;
        PayloadState payload = PayloadState::waiting;
        std::vector<std::uint8_t> buffer;
        std::optional<Fingerprint> tcp_fp;
        std::optional<Fingerprint> tls_fp;
        std::optional<Fingerprint> http_fp;
    };

    struct Pending {
        double timestamp;
        std::uint64_t sequence;
        CapturedPacket packet;
        bool operator>(const Pending& o) const
        {
            return timestamp != o.timestamp ? timestamp > o.timestamp : sequence > o.sequence;
        }
    };

    void process(const CapturedPacket& packet, std::vector<SessionRecord>& out);
    void client_payload(Flow& flow, const TcpSegment& seg);
    void scan_buffer(Flow& flow, bool final);
    void expire(double now, std::vector<SessionRecord>& out);
    void emit(const FlowKey& key, Flow& flow, std::vector<SessionRecord>& out);
    const std::string& pseudonym(const IpAddress& addr);

    PseudonymKey key_;
    AssemblerOptions opts_;
    ExtractCounters counters_;
    std::map<FlowKey, Flow> flows_;
    std::map<IpAddress, std::string> pseudonyms_;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> reorder_;
    std::uint64_t sequence_ = 0;
    double newest_ = 0.0;
    double last_expiry_ = 0.0;
};

/// Convenience wrapper over SessionAssembler for an in-memory packet list.
std::vector<SessionRecord> assemble_sessions(std::span<const CapturedPacket> packets, const PseudonymKey& key,
                                             const AssemblerOptions& opts = {}, ExtractCounters* counters = nullptr);

} // namespace osfp
