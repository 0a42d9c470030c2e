#include "affcorr/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "affcorr/errors.hpp"

namespace affcorr {

AudioClip resample_mono(const RawAudio &raw, int target_rate, std::string id) {
    if (raw.samples.empty() || raw.channels <= 0) {
        throw InvalidInput("resample_mono: empty clip");
    }
    if (raw.sample_rate <= 0) {
        throw InvalidInput("resample_mono: source sample rate must be positive");
    }
    if (target_rate <= 0) {
        throw InvalidInput("resample_mono: target sample rate must be positive");
    }

    const std::size_t frames = raw.frame_count();
    std::vector<double> mono(frames);
    if (raw.channels == 1) {
        mono = raw.samples;
    } else {
        const double inv = 1.0 / raw.channels;
        for (std::size_t f = 0; f < frames; ++f) {
            double acc = 0.0;
            for (int c = 0; c < raw.channels; ++c) {
                acc += raw.samples[f * raw.channels + c];
            }
            mono[f] = acc * inv;
        }
    }

    AudioClip out;
    out.sample_rate = target_rate;
    out.id = std::move(id);
    if (target_rate == raw.sample_rate) {
        out.samples = std::move(mono);
        return out;
    }

    const double ratio = static_cast<double>(raw.sample_rate) / target_rate;
    const std::size_t out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(frames) * target_rate / raw.sample_rate));
    out.samples.resize(std::max<std::size_t>(out_len, 1));
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double pos = static_cast<double>(i) * ratio;
        std::size_t i0 = static_cast<std::size_t>(pos);
        if (i0 >= frames - 1) {
            out.samples[i] = mono[frames - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i0);
        out.samples[i] = (1.0 - frac) * mono[i0] + frac * mono[i0 + 1];
    }
    return out;
}

namespace {

struct ChunkHeader {
    char id[4];
    std::uint32_t size;
};

std::uint16_t read_u16(const unsigned char *p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char *p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

RawAudio read_wav(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open WAV file: " + path.string());
    }

    unsigned char hdr[12];
    if (!in.read(reinterpret_cast<char *>(hdr), 12)) {
        throw FormatError("truncated WAV header: " + path.string());
    }
    if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0) {
        throw FormatError("not a RIFF/WAVE file: " + path.string());
    }

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0, format = 0;
    std::uint32_t rate = 0;
    std::vector<unsigned char> data;

    unsigned char chdr[8];
    while (in.read(reinterpret_cast<char *>(chdr), 8)) {
        const std::uint32_t size = read_u32(chdr + 4);
        if (std::memcmp(chdr, "fmt ", 4) == 0) {
            std::vector<unsigned char> fmt(size);
            if (!in.read(reinterpret_cast<char *>(fmt.data()), size) || size < 16) {
                throw FormatError("truncated fmt chunk: " + path.string());
            }
            format = read_u16(fmt.data());
            channels = read_u16(fmt.data() + 2);
            rate = read_u32(fmt.data() + 4);
            bits = read_u16(fmt.data() + 14);
            have_fmt = true;
        } else if (std::memcmp(chdr, "data", 4) == 0) {
            data.resize(size);
            if (!in.read(reinterpret_cast<char *>(data.data()), size)) {
                throw FormatError("truncated data chunk: " + path.string());
            }
        } else {
            in.seekg(size, std::ios::cur);
        }
        if (size % 2 == 1) {
            in.seekg(1, std::ios::cur); // chunks are word-aligned
        }
    }

    if (!have_fmt) {
        throw FormatError("WAV file has no fmt chunk: " + path.string());
    }
    if (format != 1 || bits != 16) {
        throw FormatError("unsupported WAV encoding (need 16-bit PCM): " + path.string());
    }
    if (channels == 0 || rate == 0) {
        throw FormatError("WAV fmt chunk has zero channels or rate: " + path.string());
    }
    if (data.empty()) {
        throw FormatError("WAV file has no samples: " + path.string());
    }

    RawAudio raw;
    raw.channels = channels;
    raw.sample_rate = static_cast<int>(rate);
    const std::size_t n = data.size() / 2;
    raw.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t s =
            static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
        raw.samples[i] = static_cast<double>(s) / 32768.0;
    }
    return raw;
}

void write_wav_mono16(const std::filesystem::path &path, std::span<const double> samples,
                      int sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open WAV file for writing: " + path.string());
    }

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    const std::uint32_t byte_rate = static_cast<std::uint32_t>(sample_rate) * 2;

    auto put_u32 = [&out](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<char *>(b), 4);
    };
    auto put_u16 = [&out](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
        out.write(reinterpret_cast<char *>(b), 2);
    };

    out.write("RIFF", 4);
    put_u32(36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(1); // PCM
    put_u16(1); // mono
    put_u32(static_cast<std::uint32_t>(sample_rate));
    put_u32(byte_rate);
    put_u16(2);  // block align
    put_u16(16); // bits
    out.write("data", 4);
    put_u32(data_bytes);

    for (double s : samples) {
        const long long q = std::llround(std::clamp(s, -1.0, 1.0) * 32768.0);
        const auto clamped = static_cast<std::int16_t>(std::clamp(q, -32768ll, 32767ll));
        put_u16(static_cast<std::uint16_t>(clamped));
    }
    if (!out) {
        throw FormatError("failed writing WAV file: " + path.string());
    }
}

} // namespace affcorr
