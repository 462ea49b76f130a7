#include "fmaml/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fmaml::audio {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

void Waveform::validate() const {
    if (!(sample_rate > 0.0)) throw Error("waveform: sample rate must be positive");
    if (samples.empty()) throw Error("waveform: no samples");
}

std::vector<double> resample_linear(const std::vector<double>& samples, double from_rate, double to_rate) {
    if (samples.empty() || from_rate == to_rate) return samples;
    const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) * to_rate / from_rate));
    std::vector<double> out(out_len);
    const double step = from_rate / to_rate;
    const std::size_t last = samples.size() - 1;
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = static_cast<double>(i) * step;
        const auto left = std::min(static_cast<std::size_t>(pos), last);
        const std::size_t right = std::min(left + 1, last);
        const double frac = pos - static_cast<double>(left);
        out[i] = samples[left] + (samples[right] - samples[left]) * std::min(frac, 1.0);
    }
    return out;
}

Waveform load_wav(const std::filesystem::path& path, double target_rate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError("cannot open WAV file: " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw WavError("malformed RIFF header: " + path.string());

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        const std::uint32_t size = read_u32(hdr + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) {
            // Truncated data chunks are common; accept what is there.
            if (std::memcmp(hdr, "data", 4) != 0) throw WavError("chunk overruns file: " + path.string());
        }
        const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (avail < 16) throw WavError("fmt chunk too short: " + path.string());
            format = read_u16(hdr + 8);
            channels = read_u16(hdr + 10);
            rate = read_u32(hdr + 12);
            bits = read_u16(hdr + 22);
            if (format == kFormatExtensible) {
                if (avail < 26) throw WavError("extensible fmt chunk too short: " + path.string());
                format = read_u16(hdr + 8 + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = avail;
        }
        pos = body + size + (size & 1u);
    }

    if (!have_fmt) throw WavError("missing fmt chunk: " + path.string());
    if (!data) throw WavError("missing data chunk: " + path.string());
    if (format != kFormatPcm || bits != 16)
        throw WavError("unsupported codec (format " + std::to_string(format) + ", " + std::to_string(bits) +
                       " bits): " + path.string());
    if (channels != 1 && channels != 2) throw WavError("unsupported channel count " + std::to_string(channels));
    if (rate == 0) throw WavError("zero sample rate: " + path.string());

    const std::size_t frames = data_size / (2u * channels);
    if (frames == 0) throw WavError("no samples: " + path.string());
    std::vector<double> mono(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const auto raw = static_cast<std::int16_t>(read_u16(data + 2 * (i * channels + c)));
            acc += static_cast<double>(raw) / 32768.0;
        }
        mono[i] = acc / static_cast<double>(channels);
    }

    Waveform wave;
    wave.samples = resample_linear(mono, static_cast<double>(rate), target_rate);
    wave.sample_rate = target_rate;
    return wave;
}

void save_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels, std::uint32_t rate) {
    if (channels.empty() || channels.size() > 2) throw WavError("save_wav: 1 or 2 channels supported");
    const std::size_t frames = channels[0].size();
    for (const auto& ch : channels)
        if (ch.size() != frames) throw WavError("save_wav: channel lengths differ");

    const auto nch = static_cast<std::uint16_t>(channels.size());
    const auto data_bytes = static_cast<std::uint32_t>(frames * nch * 2);
    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, nch);
    put_u32(out, rate);
    put_u32(out, rate * nch * 2);
    put_u16(out, static_cast<std::uint16_t>(nch * 2));
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_bytes);
    for (std::size_t i = 0; i < frames; ++i)
        for (const auto& ch : channels) {
            const double v = std::clamp(ch[i], -1.0, 32767.0 / 32768.0);
            put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(v * 32768.0))));
        }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw WavError("cannot write WAV file: " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

void save_wav(const std::filesystem::path& path, const Waveform& wave) {
    save_wav(path, std::vector<std::vector<double>>{wave.samples}, static_cast<std::uint32_t>(std::lround(wave.sample_rate)));
}

}  // namespace fmaml::audio
