#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "arrayid/util.hpp"

namespace arrayid::audio {

// N-channel sample matrix: channels[k][t], all channels equally long,
// dimensionless amplitudes in [-1, 1].
struct MultiChannelAudio {
    std::vector<std::vector<double>> channels;
    int sample_rate_hz = 48000;

    std::size_t n_channels() const { return channels.size(); }
    std::size_t n_samples() const { return channels.empty() ? 0 : channels[0].size(); }

    void validate() const {
        if (channels.empty()) throw std::invalid_argument("audio: no channels");
        if (channels[0].empty()) throw std::invalid_argument("audio: no samples");
        if (sample_rate_hz <= 0) throw std::invalid_argument("audio: sample rate must be positive");
        const std::size_t m = channels[0].size();
        for (const auto& ch : channels) {
            if (ch.size() != m)
                throw std::invalid_argument("audio: channels differ in length");
            for (double v : ch)
                if (!std::isfinite(v))
                    throw std::invalid_argument("audio: non-finite sample");
        }
    }
};

enum class BitDepth { pcm16, float32 };

namespace detail {

inline std::uint16_t rd_u16(const std::string& b, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                      (static_cast<unsigned char>(b[off + 1]) << 8));
}

inline std::uint32_t rd_u32(const std::string& b, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24);
}

inline void wr_u16(std::string& b, std::uint16_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void wr_u32(std::string& b, std::uint32_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>((v >> 8) & 0xff));
    b.push_back(static_cast<char>((v >> 16) & 0xff));
    b.push_back(static_cast<char>((v >> 24) & 0xff));
}

}  // namespace detail

// Reads RIFF/WAVE: PCM 16/32-bit integer or IEEE 32-bit float, 1-16 channels.
// Integer samples are scaled by the type's magnitude (32768 / 2147483648) so
// that the most negative code maps to exactly -1.0.
inline MultiChannelAudio load_wav(const std::string& path) {
    const std::string b = read_file_bytes(path);
    if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
        throw std::runtime_error("not a RIFF/WAVE file: " + path);

    bool have_fmt = false;
    std::uint16_t format = 0, n_channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    std::size_t data_off = 0, data_len = 0;
    bool have_data = false;

    std::size_t off = 12;
    while (off + 8 <= b.size()) {
        const std::string id = b.substr(off, 4);
        const std::uint32_t size = detail::rd_u32(b, off + 4);
        const std::size_t body = off + 8;
        if (body + size > b.size())
            throw std::runtime_error("truncated chunk '" + id + "' in " + path);
        if (id == "fmt ") {
            if (size < 16) throw std::runtime_error("malformed fmt chunk in " + path);
            format = detail::rd_u16(b, body);
            n_channels = detail::rd_u16(b, body + 2);
            sample_rate = detail::rd_u32(b, body + 4);
            bits = detail::rd_u16(b, body + 14);
            have_fmt = true;
        } else if (id == "data") {
            data_off = body;
            data_len = size;
            have_data = true;
        }
        off = body + size + (size % 2);  // chunks are word-aligned
    }
    if (!have_fmt) throw std::runtime_error("missing fmt chunk in " + path);
    if (!have_data) throw std::runtime_error("missing data chunk in " + path);
    if (n_channels < 1 || n_channels > 16)
        throw std::runtime_error("unsupported channel count " + std::to_string(n_channels) +
                                 " in " + path);
    if (sample_rate == 0) throw std::runtime_error("zero sample rate in " + path);

    std::size_t bytes_per_sample = 0;
    if (format == 1 && bits == 16) bytes_per_sample = 2;
    else if (format == 1 && bits == 32) bytes_per_sample = 4;
    else if (format == 3 && bits == 32) bytes_per_sample = 4;
    else
        throw std::runtime_error("unsupported encoding (format " + std::to_string(format) +
                                 ", " + std::to_string(bits) + " bits) in " + path);

    const std::size_t frame_bytes = bytes_per_sample * n_channels;
    const std::size_t n_frames = data_len / frame_bytes;
    if (n_frames == 0) throw std::runtime_error("zero-length audio stream in " + path);

    MultiChannelAudio out;
    out.sample_rate_hz = static_cast<int>(sample_rate);
    out.channels.assign(n_channels, std::vector<double>(n_frames));
    for (std::size_t t = 0; t < n_frames; ++t) {
        for (std::size_t k = 0; k < n_channels; ++k) {
            const std::size_t p = data_off + (t * n_channels + k) * bytes_per_sample;
            double v = 0.0;
            if (format == 1 && bits == 16) {
                const auto raw = static_cast<std::int16_t>(detail::rd_u16(b, p));
                v = static_cast<double>(raw) / 32768.0;
            } else if (format == 1 && bits == 32) {
                const auto raw = static_cast<std::int32_t>(detail::rd_u32(b, p));
                v = static_cast<double>(raw) / 2147483648.0;
            } else {
                const std::uint32_t raw = detail::rd_u32(b, p);
                float f;
                std::memcpy(&f, &raw, sizeof(f));
                v = static_cast<double>(f);
            }
            out.channels[k][t] = v;
        }
    }
    return out;
}

// Writes RIFF/WAVE. pcm16 quantizes by round(x*32768) clamped to the int16
// range; float32 is lossless up to float precision. Samples must lie in
// [-1, 1]; out-of-range input is an error, never clipped silently.
inline void save_wav(const MultiChannelAudio& audio, const std::string& path,
                     BitDepth depth) {
    audio.validate();
    if (audio.n_channels() > 16)
        throw std::invalid_argument("save_wav: more than 16 channels");
    for (const auto& ch : audio.channels)
        for (double v : ch)
            if (v < -1.0 || v > 1.0)
                throw std::invalid_argument("save_wav: sample out of [-1,1]: " +
                                            format_double(v));

    const std::uint16_t n_ch = static_cast<std::uint16_t>(audio.n_channels());
    const std::size_t n_frames = audio.n_samples();
    const std::uint16_t bits = (depth == BitDepth::pcm16) ? 16 : 32;
    const std::uint16_t format = (depth == BitDepth::pcm16) ? 1 : 3;
    const std::uint16_t block_align = static_cast<std::uint16_t>(n_ch * bits / 8);
    const std::uint32_t data_len = static_cast<std::uint32_t>(n_frames * block_align);

    std::string b;
    b.reserve(44 + data_len);
    b += "RIFF";
    detail::wr_u32(b, 36 + data_len);
    b += "WAVE";
    b += "fmt ";
    detail::wr_u32(b, 16);
    detail::wr_u16(b, format);
    detail::wr_u16(b, n_ch);
    detail::wr_u32(b, static_cast<std::uint32_t>(audio.sample_rate_hz));
    detail::wr_u32(b, static_cast<std::uint32_t>(audio.sample_rate_hz) * block_align);
    detail::wr_u16(b, block_align);
    detail::wr_u16(b, bits);
    b += "data";
    detail::wr_u32(b, data_len);

    for (std::size_t t = 0; t < n_frames; ++t) {
        for (std::size_t k = 0; k < n_ch; ++k) {
            const double v = audio.channels[k][t];
            if (depth == BitDepth::pcm16) {
                double q = std::round(v * 32768.0);
                if (q > 32767.0) q = 32767.0;
                if (q < -32768.0) q = -32768.0;
                detail::wr_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
            } else {
                const float f = static_cast<float>(v);
                std::uint32_t raw;
                std::memcpy(&raw, &f, sizeof(raw));
                detail::wr_u32(b, raw);
            }
        }
    }
    write_file_atomic(path, b);
}

enum class Label { authentic, spoof };

inline std::string to_string(Label l) {
    return l == Label::authentic ? "authentic" : "spoof";
}

inline Label label_from_string(const std::string& s) {
    if (s == "authentic") return Label::authentic;
    if (s == "spoof") return Label::spoof;
    throw std::runtime_error("unknown label '" + s + "'");
}

struct ManifestEntry {
    std::string path;
    Label label = Label::authentic;
    std::optional<double> distance_m;
    std::string device_id;  // empty when not applicable
    std::string user_id;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::size_t count(Label l) const {
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.label == l) ++n;
        return n;
    }
};

inline constexpr const char* kManifestHeader = "path,label,distance_m,device_id,user_id";

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// CSV schema: path,label,distance_m,device_id,user_id ; label is exactly
// `authentic` or `spoof`; the three trailing fields may be empty. Fields must
// not contain commas (no quoting dialect).
inline DatasetManifest load_manifest(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    std::istringstream in(bytes);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("manifest is empty (missing header): " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader)
        throw std::runtime_error("manifest header mismatch in " + path + ": got '" + line + "'");

    DatasetManifest m;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cols = detail::split_csv_row(line);
        if (cols.size() != 5)
            throw std::runtime_error("manifest " + path + " line " + std::to_string(line_no) +
                                     ": expected 5 columns, got " + std::to_string(cols.size()));
        ManifestEntry e;
        e.path = cols[0];
        try {
            e.label = label_from_string(cols[1]);
        } catch (const std::exception&) {
            throw std::runtime_error("manifest " + path + " line " + std::to_string(line_no) +
                                     ": unknown label '" + cols[1] + "'");
        }
        if (!cols[2].empty()) {
            try {
                std::size_t used = 0;
                e.distance_m = std::stod(cols[2], &used);
                if (used != cols[2].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw std::runtime_error("manifest " + path + " line " + std::to_string(line_no) +
                                         ": bad distance '" + cols[2] + "'");
            }
        }
        e.device_id = cols[3];
        e.user_id = cols[4];
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline std::string manifest_to_csv(const DatasetManifest& m) {
    std::string out = std::string(kManifestHeader) + "\n";
    for (const auto& e : m.entries) {
        out += e.path;
        out += ',';
        out += to_string(e.label);
        out += ',';
        if (e.distance_m) out += format_double(*e.distance_m);
        out += ',';
        out += e.device_id;
        out += ',';
        out += e.user_id;
        out += '\n';
    }
    return out;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    write_file_atomic(path, manifest_to_csv(m));
}

}  // namespace arrayid::audio
