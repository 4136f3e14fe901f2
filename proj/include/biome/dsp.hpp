#pragma once

#include <algorithm>
#include <vector>

#include "biome/common.hpp"
#include "biome/fft.hpp"
#include "biome/matrix.hpp"

namespace biome::dsp {

// Mono waveform, amplitudes nominally in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 16000;

    double duration_seconds() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
    void validate() const {
        require(sample_rate > 0, "AudioClip: sample_rate must be positive");
        require(!samples.empty(), "AudioClip: empty clip");
        for (double s : samples)
            if (!std::isfinite(s)) throw InputError("AudioClip: non-finite sample");
    }
};

constexpr int kModelSampleRate = 16000;

// Windowed-sinc resampler. Output time n maps to input time n*src/dst; each
// output sample is a Hann-windowed sinc interpolation normalized by the
// kernel sum so edges keep unity gain.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
    clip.validate();
    require(target_rate > 0, "resample: target_rate must be positive");
    if (target_rate == clip.sample_rate) return clip;

    const int64_t in_len = static_cast<int64_t>(clip.samples.size());
    const int64_t out_len =
        std::max<int64_t>(1, (in_len * target_rate + clip.sample_rate / 2) / clip.sample_rate);
    const double step = static_cast<double>(clip.sample_rate) / target_rate;
    // Cutoff at the smaller Nyquist, in cycles per input sample.
    const double fc = 0.5 * std::min(1.0, static_cast<double>(target_rate) / clip.sample_rate);
    const int half_taps = 32;

    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(static_cast<size_t>(out_len));
    for (int64_t n = 0; n < out_len; ++n) {
        const double t = n * step;
        const int64_t k0 = static_cast<int64_t>(std::ceil(t)) - half_taps;
        const int64_t k1 = static_cast<int64_t>(std::floor(t)) + half_taps;
        double acc = 0.0, wsum = 0.0;
        for (int64_t k = k0; k <= k1; ++k) {
            const double u = t - k;
            const double x = 2.0 * fc * u;
            const double sinc = (std::abs(x) < 1e-12) ? 1.0 : std::sin(kPi * x) / (kPi * x);
            const double hann = 0.5 + 0.5 * std::cos(kPi * u / half_taps);
            const double w = 2.0 * fc * sinc * hann;
            wsum += w;
            if (k >= 0 && k < in_len) acc += clip.samples[static_cast<size_t>(k)] * w;
        }
        out.samples[static_cast<size_t>(n)] = (wsum != 0.0) ? acc / wsum : 0.0;
    }
    return out;
}

struct MelConfig {
    int n_mels = 128;
    double win_seconds = 0.025;
    double hop_seconds = 0.010;
    double log_floor = 1e-10;  // values are log(power + log_floor)
};

struct MelSpectrogram {
    Mat values;  // n_mels x n_frames, log power
    double frame_hop = 0.010;
    int n_mels = 0;

    int n_frames() const { return values.cols; }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Center frequency (Hz) of mel band m for a bank of n_mels triangles spanning
// [0, sr/2] with edges uniform on the mel scale.
inline double mel_band_center_hz(int m, int n_mels, int sample_rate) {
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    return mel_to_hz((m + 1) * mel_max / (n_mels + 1));
}

inline MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelConfig& cfg = {}) {
    clip.validate();
    require(cfg.n_mels > 0, "mel_spectrogram: n_mels must be positive");
    require(cfg.win_seconds >= cfg.hop_seconds && cfg.hop_seconds > 0,
            "mel_spectrogram: need win_len >= hop > 0");
    const int sr = clip.sample_rate;
    const int win = static_cast<int>(std::lround(cfg.win_seconds * sr));
    const int hop = static_cast<int>(std::lround(cfg.hop_seconds * sr));
    const int n = static_cast<int>(clip.samples.size());
    require(n >= win, "mel_spectrogram: clip shorter than one window");
    const int n_frames = (n - win) / hop + 1;
    const int nfft = next_pow2(win);
    const int n_bins = nfft / 2 + 1;

    // Triangular filters with edges uniform in mel between 0 and Nyquist.
    const double mel_max = hz_to_mel(sr / 2.0);
    std::vector<double> edge_hz(static_cast<size_t>(cfg.n_mels) + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i) edge_hz[i] = mel_to_hz(i * mel_max / (cfg.n_mels + 1));
    Mat fbank(cfg.n_mels, n_bins);
    std::vector<int> k_lo(static_cast<size_t>(cfg.n_mels), n_bins);
    std::vector<int> k_hi(static_cast<size_t>(cfg.n_mels), 0);
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edge_hz[m], c = edge_hz[m + 1], hi = edge_hz[m + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sr / nfft;
            double w = 0.0;
            if (f > lo && f < hi) w = (f <= c) ? (f - lo) / (c - lo) : (hi - f) / (hi - c);
            fbank.at(m, k) = w;
            if (w > 0.0) {
                k_lo[static_cast<size_t>(m)] = std::min(k_lo[static_cast<size_t>(m)], k);
                k_hi[static_cast<size_t>(m)] = std::max(k_hi[static_cast<size_t>(m)], k + 1);
            }
        }
    }

    const std::vector<double> window = hann_window(win);
    std::vector<double> frame(static_cast<size_t>(win));
    Mat power(n_bins, n_frames);
    for (int t = 0; t < n_frames; ++t) {
        const double* src = clip.samples.data() + static_cast<size_t>(t) * hop;
        for (int i = 0; i < win; ++i) frame[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
        const std::vector<double> mag = real_fft_magnitude(frame.data(), win, nfft);
        for (int k = 0; k < n_bins; ++k) power.at(k, t) = mag[static_cast<size_t>(k)] * mag[static_cast<size_t>(k)];
    }

    MelSpectrogram mel;
    mel.n_mels = cfg.n_mels;
    mel.frame_hop = static_cast<double>(hop) / sr;
    mel.values = Mat(cfg.n_mels, n_frames);
    for (int m = 0; m < cfg.n_mels; ++m)
        for (int t = 0; t < n_frames; ++t) {
            double s = 0.0;
            for (int k = k_lo[static_cast<size_t>(m)]; k < k_hi[static_cast<size_t>(m)]; ++k)
                s += fbank.at(m, k) * power.at(k, t);
            mel.values.at(m, t) = std::log(s + cfg.log_floor);
        }
    return mel;
}

// 16x16 non-overlapping patch grid over a spectrogram, time-major order:
// patch p = t_block * freq_patches + f_block, each row flattened with the
// 16 mel rows outer and the 16 frames inner. Remainders are dropped.
struct PatchSequence {
    static constexpr int kPatchSize = 16;
    Mat patches;  // n_patches x 256
    int freq_patches = 0;
    int time_patches = 0;

    int count() const { return patches.rows; }
};

inline PatchSequence patchify(const MelSpectrogram& mel) {
    constexpr int P = PatchSequence::kPatchSize;
    require_shape(mel.values.rows >= P && mel.values.cols >= P,
                  "patchify: need at least a 16x16 spectrogram, got " + shape_str(mel.values));
    PatchSequence seq;
    seq.freq_patches = mel.values.rows / P;
    seq.time_patches = mel.values.cols / P;
    seq.patches = Mat(seq.freq_patches * seq.time_patches, P * P);
    for (int tb = 0; tb < seq.time_patches; ++tb)
        for (int fb = 0; fb < seq.freq_patches; ++fb) {
            double* prow = seq.patches.row_ptr(tb * seq.freq_patches + fb);
            for (int i = 0; i < P; ++i)
                for (int j = 0; j < P; ++j)
                    prow[i * P + j] = mel.values.at(fb * P + i, tb * P + j);
        }
    return seq;
}

struct ModSpecConfig {
    int nfft_acoustic = 512;
    int nfft_mod = 512;
    double win_seconds = 0.032;
    double hop_seconds = 0.008;
};

// Two-stage map: acoustic STFT magnitude |X(t,f)|, then per acoustic bin a
// magnitude FFT along t. Rows are acoustic bins, columns modulation bins,
// both one-sided. Long clips are averaged over non-overlapping nfft_mod-frame
// segments; clips shorter than nfft_mod frames use one zero-padded segment.
struct ModulationSpectrogram {
    Mat values;  // (nfft_acoustic/2+1) x (nfft_mod/2+1), magnitudes
    double acoustic_bin_hz = 0.0;
    double mod_bin_hz = 0.0;
    bool zero_padded = false;
    int segments_averaged = 1;
};

inline ModulationSpectrogram modulation_spectrogram(const AudioClip& clip,
                                                    const ModSpecConfig& cfg = {}) {
    clip.validate();
    require(is_pow2(cfg.nfft_acoustic) && is_pow2(cfg.nfft_mod),
            "modulation_spectrogram: FFT sizes must be powers of two");
    const int sr = clip.sample_rate;
    int win = static_cast<int>(std::lround(cfg.win_seconds * sr));
    win = std::min(win, cfg.nfft_acoustic);
    const int hop = std::max(1, static_cast<int>(std::lround(cfg.hop_seconds * sr)));

    std::vector<double> x = clip.samples;
    if (static_cast<int>(x.size()) < win) x.resize(static_cast<size_t>(win), 0.0);
    const int n_frames = (static_cast<int>(x.size()) - win) / hop + 1;
    const int n_bins = cfg.nfft_acoustic / 2 + 1;
    const int n_mod = cfg.nfft_mod / 2 + 1;

    const std::vector<double> window = hann_window(win);
    std::vector<double> frame(static_cast<size_t>(win));
    Mat stft_mag(n_bins, n_frames);
    for (int t = 0; t < n_frames; ++t) {
        const double* src = x.data() + static_cast<size_t>(t) * hop;
        for (int i = 0; i < win; ++i) frame[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
        const std::vector<double> mag = real_fft_magnitude(frame.data(), win, cfg.nfft_acoustic);
        for (int k = 0; k < n_bins; ++k) stft_mag.at(k, t) = mag[static_cast<size_t>(k)];
    }

    ModulationSpectrogram out;
    out.acoustic_bin_hz = static_cast<double>(sr) / cfg.nfft_acoustic;
    out.mod_bin_hz = (static_cast<double>(sr) / hop) / cfg.nfft_mod;
    out.zero_padded = n_frames < cfg.nfft_mod;
    out.segments_averaged = std::max(1, n_frames / cfg.nfft_mod);
    out.values = Mat(n_bins, n_mod);

    std::vector<double> seg(static_cast<size_t>(cfg.nfft_mod));
    for (int k = 0; k < n_bins; ++k) {
        for (int s = 0; s < out.segments_averaged; ++s) {
            const int f0 = s * cfg.nfft_mod;
            const int avail = std::min(cfg.nfft_mod, n_frames - f0);
            for (int i = 0; i < avail; ++i) seg[static_cast<size_t>(i)] = stft_mag.at(k, f0 + i);
            std::fill(seg.begin() + avail, seg.end(), 0.0);
            const std::vector<double> mag = real_fft_magnitude(seg.data(), cfg.nfft_mod, cfg.nfft_mod);
            for (int m = 0; m < n_mod; ++m) out.values.at(k, m) += mag[static_cast<size_t>(m)];
        }
        for (int m = 0; m < n_mod; ++m) out.values.at(k, m) /= out.segments_averaged;
    }
    return out;
}

// Band-averaged summary of a modulation spectrogram: log1p-compress, then
// concatenate per-row means with per-column means (length rows + cols).
struct MSABVector {
    std::vector<double> values;

    int dim() const { return static_cast<int>(values.size()); }
};

inline MSABVector msab(const ModulationSpectrogram& modspec) {
    const Mat& m = modspec.values;
    require(!m.empty(), "msab: empty modulation spectrogram");
    Mat logm(m.rows, m.cols);
    for (size_t i = 0; i < m.size(); ++i) logm.v[i] = std::log1p(m.v[i]);
    MSABVector out;
    out.values.resize(static_cast<size_t>(m.rows) + m.cols, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < m.cols; ++c) s += logm.at(r, c);
        out.values[static_cast<size_t>(r)] = s / m.cols;
    }
    for (int c = 0; c < m.cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < m.rows; ++r) s += logm.at(r, c);
        out.values[static_cast<size_t>(m.rows) + c] = s / m.rows;
    }
    return out;
}

// Square modulation map at a given per-axis resolution: one-sided map from
// 2N-point FFTs on both axes with the Nyquist row/column dropped, so an
// N x N map summarizes to a 2N-dim MSAB vector (512 for the default N=256).
inline ModulationSpectrogram modulation_map(const AudioClip& clip, int resolution = 256) {
    require(is_pow2(resolution), "modulation_map: resolution must be a power of two");
    ModSpecConfig cfg;
    cfg.nfft_acoustic = 2 * resolution;
    cfg.nfft_mod = 2 * resolution;
    ModulationSpectrogram full = modulation_spectrogram(clip, cfg);
    ModulationSpectrogram out = full;
    out.values = Mat(resolution, resolution);
    for (int r = 0; r < resolution; ++r)
        for (int c = 0; c < resolution; ++c) out.values.at(r, c) = full.values.at(r, c);
    return out;
}

inline MSABVector msab_features(const AudioClip& clip, int resolution = 256) {
    return msab(modulation_map(clip, resolution));
}

}  // namespace biome::dsp
