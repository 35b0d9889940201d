#include "osfp/assembler.hpp"

#include "osfp/error.hpp"

#include <algorithm>

namespace osfp {

nlohmann::ordered_json ExtractCounters::to_json() const
{
    return {{"packets", packets},
            {"tcp_packets", tcp_packets},
            {"sessions", sessions},
            {"malformed_packets", malformed_packets},
            {"malformed", {{"tcp", malformed_tcp}, {"tls", malformed_tls}, {"http", malformed_http}}},
            {"unsupported_link", unsupported_link},
            {"truncated_captures", truncated_captures}};
}

ExtractCounters& ExtractCounters::operator+=(const ExtractCounters& o)
{
    packets += o.packets;
    tcp_packets += o.tcp_packets;
    sessions += o.sessions;
    malformed_packets += o.malformed_packets;
    malformed_tcp += o.malformed_tcp;
    malformed_tls += o.malformed_tls;
    malformed_http += o.malformed_http;
    unsupported_link += o.unsupported_link;
    truncated_captures += o.truncated_captures;
    return *this;
}

SessionAssembler::SessionAssembler(PseudonymKey key, AssemblerOptions opts) : key_(std::move(key)), opts_(opts) {}

void SessionAssembler::push(CapturedPacket packet, std::vector<SessionRecord>& out)
{
    ++counters_.packets;
    double ts = packet.timestamp;
    newest_ = std::max(newest_, ts);
    reorder_.push(Pending{ts, sequence_++, std::move(packet)});
    while (!reorder_.empty() && reorder_.top().timestamp <= newest_ - opts_.reorder_window) {
        CapturedPacket next = std::move(const_cast<Pending&>(reorder_.top()).packet);
        reorder_.pop();
        process(next, out);
    }
}

void SessionAssembler::finish(std::vector<SessionRecord>& out)
{
    while (!reorder_.empty()) {
        CapturedPacket next = std::move(const_cast<Pending&>(reorder_.top()).packet);
        reorder_.pop();
        process(next, out);
    }
    std::vector<std::pair<double, FlowKey>> order;
    order.reserve(flows_.size());
    for (const auto& [key, flow] : flows_)
        order.emplace_back(flow.start_time, key);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [start, key] : order)
        emit(key, flows_.at(key), out);
    flows_.clear();
}

void SessionAssembler::process(const CapturedPacket& packet, std::vector<SessionRecord>& out)
{
    std::optional<TcpSegment> seg;
    try {
        seg = decode_tcp(packet.view());
    } catch (const MalformedPacket&) {
        ++counters_.malformed_packets;
        return;
    }
    if (!seg)
        return;
    ++counters_.tcp_packets;

    const double ts = packet.timestamp;
    if (ts - last_expiry_ >= 1.0) {
        expire(ts, out);
        last_expiry_ = ts;
    }

    const bool syn = (seg->flags & tcp_flag::syn) && !(seg->flags & tcp_flag::ack);
    FlowKey fwd{seg->src, seg->dst, seg->src_port, seg->dst_port};
    if (auto it = flows_.find(fwd); it != flows_.end()) {
        Flow& flow = it->second;
        flow.last_seen = std::max(flow.last_seen, ts);
        if (!syn)
            client_payload(flow, *seg);
        return;
    }
    FlowKey rev{seg->dst, seg->src, seg->dst_port, seg->src_port};
    if (auto it = flows_.find(rev); it != flows_.end()) {
        it->second.last_seen = std::max(it->second.last_seen, ts);
        return;
    }

    if (syn) {
        Flow flow;
        flow.start_time = ts;
        flow.last_seen = ts;
        flow.saw_syn = true;
        flow.next_seq = seg->seq + 1;
        try {
            int ttl = opts_.wire.normalize_ttl ? normalize_ttl(seg->ttl) : seg->ttl;
            flow.tcp_fp = Fingerprint::tcp(ttl, decode_tcp_options(seg->options));
        } catch (const MalformedPacket&) {
            ++counters_.malformed_tcp;
        }
        auto& stored = flows_.emplace(fwd, std::move(flow)).first->second;
        client_payload(stored, *seg);
        return;
    }

    const auto& payload = seg->payload;
    if (payload.empty())
        return;
    if (payload[0] != 0x16 && !looks_like_http_request(payload))
        return;
    Flow flow;
    flow.start_time = ts;
    flow.last_seen = ts;
    auto& stored = flows_.emplace(fwd, std::move(flow)).first->second;
    client_payload(stored, *seg);
}

void SessionAssembler::client_payload(Flow& flow, const TcpSegment& seg)
{
    if (seg.payload.empty() || flow.payload == PayloadState::done)
        return;
    if (flow.next_seq && seg.seq != *flow.next_seq)
        return;  // retransmission or out-of-order segment
    flow.next_seq = static_cast<std::uint32_t>(seg.seq + seg.payload.size());

    std::size_t room = opts_.max_payload_buffer - std::min(opts_.max_payload_buffer, flow.buffer.size());
    std::size_t take = std::min(room, seg.payload.size());
    flow.buffer.insert(flow.buffer.end(), seg.payload.begin(), seg.payload.begin() + static_cast<std::ptrdiff_t>(take));

    if (flow.payload == PayloadState::waiting) {
        if (flow.buffer[0] == 0x16)
            flow.payload = PayloadState::buffering_tls;
        else if (looks_like_http_request(flow.buffer))
            flow.payload = PayloadState::buffering_http;
        else {
            flow.payload = PayloadState::done;
            flow.buffer.clear();
            return;
        }
    }
    scan_buffer(flow, false);
}

void SessionAssembler::scan_buffer(Flow& flow, bool final)
{
    const bool full = flow.buffer.size() >= opts_.max_payload_buffer;
    try {
        if (flow.payload == PayloadState::buffering_tls) {
            auto r = scan_tls_client_hello(flow.buffer, opts_.wire);
            if (r.status == ScanStatus::need_more) {
                if (!final && !full)
                    return;
                ++counters_.malformed_tls;
            } else if (r.fingerprint) {
                flow.tls_fp = std::move(r.fingerprint);
            }
        } else if (flow.payload == PayloadState::buffering_http) {
            auto r = scan_http_request(flow.buffer, opts_.wire);
            if (r.status == ScanStatus::need_more) {
                if (!final && !full)
                    return;
                ++counters_.malformed_http;
            } else if (r.fingerprint) {
                flow.http_fp = std::move(r.fingerprint);
            }
        } else {
            return;
        }
    } catch (const MalformedHello&) {
        ++counters_.malformed_tls;
    } catch (const MalformedRequest&) {
        ++counters_.malformed_http;
    }
    flow.payload = PayloadState::done;
    flow.buffer.clear();
    flow.buffer.shrink_to_fit();
}

void SessionAssembler::expire(double now, std::vector<SessionRecord>& out)
{
    std::vector<std::pair<double, FlowKey>> idle;
    for (const auto& [key, flow] : flows_)
        if (flow.last_seen < now - opts_.idle_timeout)
            idle.emplace_back(flow.start_time, key);
    std::stable_sort(idle.begin(), idle.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [start, key] : idle) {
        auto it = flows_.find(key);
        emit(key, it->second, out);
        flows_.erase(it);
    }
}

void SessionAssembler::emit(const FlowKey& key, Flow& flow, std::vector<SessionRecord>& out)
{
    scan_buffer(flow, true);
    if (!flow.tcp_fp && !flow.tls_fp && !flow.http_fp)
        return;
    SessionRecord r;
    r.key.src_id = pseudonym(key.client);
    r.key.dst_id = pseudonym(key.server);
    r.key.src_port = key.client_port;
    r.key.dst_port = key.server_port;
    r.start_time = flow.start_time;
    r.tcp_fp = std::move(flow.tcp_fp);
    r.tls_fp = std::move(flow.tls_fp);
    r.http_fp = std::move(flow.http_fp);
    out.push_back(std::move(r));
    ++counters_.sessions;
}

const std::string& SessionAssembler::pseudonym(const IpAddress& addr)
{
    auto it = pseudonyms_.find(addr);
    if (it == pseudonyms_.end())
        it = pseudonyms_.emplace(addr, pseudonymize_address(addr, key_)).first;
    return it->second;
}

std::vector<SessionRecord> assemble_sessions(std::span<const CapturedPacket> packets, const PseudonymKey& key,
                                             const AssemblerOptions& opts, ExtractCounters* counters)
{
    SessionAssembler assembler(key, opts);
    std::vector<SessionRecord> out;
    for (const auto& p : packets)
        assembler.push(p, out);
    assembler.finish(out);
    if (counters)
        *counters = assembler.counters();
    return out;
}

} // namespace osfp
