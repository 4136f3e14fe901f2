#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "biome/dsp.hpp"

namespace biome::io {

// RIFF/WAV reader: PCM16 or IEEE float32, mono or first channel of a
// multi-channel stream. Unknown chunks are skipped.
inline dsp::AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("wav: cannot open '" + path + "'");
    std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 12 || std::memcmp(blob.data(), "RIFF", 4) != 0 ||
        std::memcmp(blob.data() + 8, "WAVE", 4) != 0)
        throw InputError("wav: '" + path + "' is not a RIFF/WAVE file");

    auto rd_u32 = [&blob](size_t off) {
        uint32_t v;
        std::memcpy(&v, blob.data() + off, 4);
        return v;
    };
    auto rd_u16 = [&blob](size_t off) {
        uint16_t v;
        std::memcpy(&v, blob.data() + off, 2);
        return v;
    };

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    size_t data_off = 0, data_len = 0;
    size_t pos = 12;
    while (pos + 8 <= blob.size()) {
        const std::string id(blob.data() + pos, 4);
        const uint32_t len = rd_u32(pos + 4);
        const size_t body = pos + 8;
        if (body + len > blob.size()) throw InputError("wav: truncated chunk '" + id + "'");
        if (id == "fmt ") {
            if (len < 16) throw InputError("wav: fmt chunk too short");
            format = rd_u16(body);
            channels = rd_u16(body + 2);
            sample_rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
            if (format == 0xFFFE && len >= 40) format = rd_u16(body + 24);  // extensible subformat
        } else if (id == "data") {
            data_off = body;
            data_len = len;
        }
        pos = body + len + (len & 1);  // chunks are word-aligned
    }
    if (sample_rate == 0 || channels == 0) throw InputError("wav: missing fmt chunk");
    if (data_len == 0) throw InputError("wav: missing data chunk");
    if (!(format == 1 && bits == 16) && !(format == 3 && bits == 32))
        throw InputError("wav: unsupported encoding (want PCM16 or IEEE float32)");

    const size_t bytes_per = bits / 8;
    const size_t frame_bytes = bytes_per * channels;
    const size_t n_frames = data_len / frame_bytes;
    if (n_frames == 0) throw InputError("wav: empty data chunk");

    dsp::AudioClip clip;
    clip.sample_rate = static_cast<int>(sample_rate);
    clip.samples.resize(n_frames);
    for (size_t i = 0; i < n_frames; ++i) {
        const size_t off = data_off + i * frame_bytes;  // channel 0
        if (format == 1) {
            int16_t s;
            std::memcpy(&s, blob.data() + off, 2);
            clip.samples[i] = static_cast<double>(s) / 32768.0;
        } else {
            float f;
            std::memcpy(&f, blob.data() + off, 4);
            clip.samples[i] = f;
        }
    }
    clip.validate();
    return clip;
}

inline void write_wav_pcm16(const std::string& path, const dsp::AudioClip& clip) {
    clip.validate();
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_len = n * 2;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("wav: cannot open '" + path + "' for writing");
    auto wr_u32 = [&out](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto wr_u16 = [&out](uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    wr_u32(36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    wr_u32(16);
    wr_u16(1);  // PCM
    wr_u16(1);  // mono
    wr_u32(static_cast<uint32_t>(clip.sample_rate));
    wr_u32(static_cast<uint32_t>(clip.sample_rate) * 2);
    wr_u16(2);
    wr_u16(16);
    out.write("data", 4);
    wr_u32(data_len);
    for (double s : clip.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const auto q = static_cast<int16_t>(std::lround(c * 32767.0));
        out.write(reinterpret_cast<const char*>(&q), 2);
    }
    if (!out) throw InputError("wav: write failed for '" + path + "'");
}

}  // namespace biome::io
