#include "steth/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "steth/error.hpp"

namespace steth {

namespace {

void require_audio(const AudioBuffer& input, const ChainConfig& cfg)
{
    if (input.empty())
        fail(ErrorCode::InvalidArgument, "input audio is empty");
    if (input.sample_rate() != cfg.sample_rate)
        fail(ErrorCode::InvalidArgument,
             "input is sampled at " + std::to_string(input.sample_rate()) +
                 " Hz but the chain runs at " + std::to_string(cfg.sample_rate) +
                 " Hz (resampling is not supported)");
}

double percentile(std::vector<double> v, double q)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const auto rank = std::size_t(std::ceil(q * double(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

} // namespace

std::uint8_t cutoff_flags(const ChainConfig& cfg) noexcept
{
    return cfg.cutoff_hz == 1000 ? packet_flags::kCutoffHigh : std::uint8_t{0};
}

ProcessResult process_audio(const AudioBuffer& input, const ChainConfig& cfg)
{
    cfg.validate();
    require_audio(input, cfg);

    TransmitChain chain(cfg);
    SampleBlock codes = chain.process(input);
    AudioBuffer output = dequantize_dac(codes, cfg.full_scale);

    const Biquad lp = design_lowpass(cfg.cutoff_hz, cfg.filter_gain, cfg.sample_rate);
    ProcessReport r;
    r.preamp_gain = cfg.preamp_gain;
    r.filter_dc_gain = std::abs(lp.response(0.0, cfg.sample_rate));
    r.filter_gain_at_cutoff = std::abs(lp.response(cfg.cutoff_hz, cfg.sample_rate));
    r.power_gain_effective = cfg.volume * cfg.power_gain;
    r.nominal_gain = cfg.nominal_gain();
    r.input_rms = rms(input.samples());
    r.output_rms = rms(output.samples());
    r.clipped_samples = chain.clipped_samples();
    return {std::move(output), std::move(codes), r};
}

SimulateResult simulate_link(const AudioBuffer& input, const SimulateConfig& cfg)
{
    cfg.chain.validate();
    cfg.link.validate();
    require_audio(input, cfg.chain);

    const SampleBlock codes = run_transmit_chain(input, cfg.chain);
    const std::vector<Packet> packets = packetize(codes, 0, cutoff_flags(cfg.chain));

    const double rate = cfg.chain.sample_rate;
    std::vector<TimedPacket> timed;
    timed.reserve(packets.size());
    for (const Packet& p : packets)
        timed.push_back({p, double(std::uint64_t(p.timestamp) + p.codes.size()) / rate});

    const LinkReport link = link_transmit(timed, cfg.link);

    JitterConfig jc;
    jc.depth = cfg.depth;
    jc.concealment = cfg.concealment;
    jc.sample_rate = cfg.chain.sample_rate;
    jc.start_timestamp = codes.start_timestamp;
    JitterStats js;
    SampleBlock received = reassemble(link.packets, jc,
                                      codes.start_timestamp + codes.codes.size(), &js);

    SimulateStats st;
    st.sent = packets.size();
    st.delivered = js.played;
    st.dropped = js.dropped;
    st.late = js.late;
    st.concealed_samples = js.concealed_samples;
    st.utilization = link.utilization;

    std::vector<double> latency;
    for (const DeliveredPacket& dp : link.packets)
        if (!dp.dropped)
            latency.push_back(dp.arrival_time - dp.send_time);
    st.latency_p50 = percentile(latency, 0.50);
    st.latency_p95 = percentile(latency, 0.95);
    st.latency_p99 = percentile(latency, 0.99);
    st.latency_max = percentile(latency, 1.0);

    AudioBuffer output = dequantize_dac(received, cfg.chain.full_scale);
    return {std::move(output), std::move(received), st};
}

} // namespace steth
