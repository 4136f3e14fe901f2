#include <gtest/gtest.h>

#include "biome/dsp.hpp"
#include "biome/synth.hpp"
#include "support/oracles.hpp"

using namespace biome;

namespace {

dsp::AudioClip sine(double freq, double seconds, int sr, double amp = 0.5) {
    return synth::tone(freq, seconds, sr, amp);
}

}  // namespace

// ---- resample ----

TEST(Resample, IdentityRateReturnsIdenticalSamples) {
    dsp::AudioClip c = sine(440.0, 0.25, 16000);
    dsp::AudioClip r = dsp::resample(c, 16000);
    ASSERT_EQ(r.samples.size(), c.samples.size());
    for (size_t i = 0; i < c.samples.size(); ++i) EXPECT_EQ(r.samples[i], c.samples[i]);
}

TEST(Resample, HalvingRateHalvesLength) {
    dsp::AudioClip c = sine(440.0, 1.0, 32000);
    ASSERT_EQ(c.samples.size(), 32000u);
    dsp::AudioClip r = dsp::resample(c, 16000);
    EXPECT_EQ(r.sample_rate, 16000);
    EXPECT_EQ(r.samples.size(), 16000u);
}

TEST(Resample, DurationPreservedWithinOneSample) {
    dsp::AudioClip c = sine(100.0, 0.7321, 22050);
    dsp::AudioClip r = dsp::resample(c, 16000);
    const double d_in = c.duration_seconds();
    const double d_out = r.duration_seconds();
    EXPECT_LE(std::abs(d_in - d_out), 1.0 / 16000 + 1e-12);
}

TEST(Resample, FftPeakBinOracleSurvivesUpsampling) {
    // 1 kHz sine at 8 kHz upsampled to 16 kHz must still peak at 1 kHz.
    dsp::AudioClip c = sine(1000.0, 1.0, 8000);
    dsp::AudioClip r = dsp::resample(c, 16000);
    const int n = 2048;
    ASSERT_GE(r.samples.size(), static_cast<size_t>(2 * n));
    // Skip the first taps worth of edge transient, then window with Hann.
    std::vector<double> seg(r.samples.begin() + 256, r.samples.begin() + 256 + n);
    for (int i = 0; i < n; ++i) seg[static_cast<size_t>(i)] *= 0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1));
    std::vector<double> mag = oracles::naive_dft_magnitude(seg, n);
    int arg = 1;
    for (int k = 1; k <= n / 2; ++k)
        if (mag[static_cast<size_t>(k)] > mag[static_cast<size_t>(arg)]) arg = k;
    const int expected = static_cast<int>(std::lround(1000.0 * n / 16000.0));
    EXPECT_EQ(arg, expected);
}

TEST(Resample, EmptyClipRejected) {
    dsp::AudioClip c;
    c.sample_rate = 16000;
    EXPECT_THROW(dsp::resample(c, 8000), InputError);
}

// ---- mel ----

TEST(Mel, FrameCountMatchesArithmeticOracle) {
    dsp::AudioClip c = sine(500.0, 1.0, 16000);
    dsp::MelSpectrogram m = dsp::mel_spectrogram(c);
    // floor((16000 - 400)/160) + 1
    EXPECT_EQ(m.values.cols, 98);
    EXPECT_EQ(m.values.rows, 128);
}

TEST(Mel, SilenceGivesLogFloorEverywhere) {
    dsp::AudioClip c;
    c.sample_rate = 16000;
    c.samples.assign(16000, 0.0);
    dsp::MelSpectrogram m = dsp::mel_spectrogram(c);
    const double expect = std::log(1e-10);
    for (double v : m.values.v) EXPECT_DOUBLE_EQ(v, expect);
}

TEST(Mel, PureToneArgmaxMatchesCenterFrequencyOracle) {
    dsp::AudioClip c = sine(1000.0, 1.0, 16000);
    dsp::MelSpectrogram m = dsp::mel_spectrogram(c);
    // Oracle: centers are uniform on the mel scale over [0, Nyquist].
    auto mel_of = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto hz_of = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
    const double mel_max = mel_of(8000.0);
    int nearest = 0;
    double best = 1e18;
    for (int b = 0; b < 128; ++b) {
        const double center = hz_of((b + 1) * mel_max / 129.0);
        if (std::abs(center - 1000.0) < best) {
            best = std::abs(center - 1000.0);
            nearest = b;
        }
    }
    // argmax over mel bins of the mid-clip frame and of the per-bin mean
    int arg = 0;
    double mx = -1e300;
    for (int b = 0; b < m.values.rows; ++b) {
        double mean = 0.0;
        for (int t = 0; t < m.values.cols; ++t) mean += m.values.at(b, t);
        if (mean > mx) {
            mx = mean;
            arg = b;
        }
    }
    EXPECT_EQ(arg, nearest);
}

TEST(Mel, ClipShorterThanWindowRejected) {
    dsp::AudioClip c = sine(500.0, 0.01, 16000);  // 160 samples < 400-sample window
    EXPECT_THROW(dsp::mel_spectrogram(c), InputError);
}

// ---- patchify ----

TEST(Patchify, ExactGridArithmetic) {
    dsp::MelSpectrogram m;
    m.n_mels = 128;
    m.values = Mat(128, 160);
    dsp::PatchSequence p = dsp::patchify(m);
    EXPECT_EQ(p.freq_patches, 8);
    EXPECT_EQ(p.time_patches, 10);
    EXPECT_EQ(p.count(), 80);
    EXPECT_EQ(p.patches.cols, 256);
}

TEST(Patchify, RemainderFramesDropped) {
    dsp::MelSpectrogram m;
    m.n_mels = 128;
    m.values = Mat(128, 175);
    dsp::PatchSequence p = dsp::patchify(m);
    EXPECT_EQ(p.freq_patches, 8);
    EXPECT_EQ(p.time_patches, 10);
    EXPECT_EQ(p.count(), 80);
}

TEST(Patchify, ConstantInputGivesIdenticalPatches) {
    dsp::MelSpectrogram m;
    m.n_mels = 32;
    m.values = Mat::full(32, 48, 2.5);
    dsp::PatchSequence p = dsp::patchify(m);
    for (int i = 1; i < p.count(); ++i)
        for (int j = 0; j < 256; ++j) EXPECT_EQ(p.patches.at(i, j), p.patches.at(0, j));
}

TEST(Patchify, TooSmallInputRejected) {
    dsp::MelSpectrogram m;
    m.n_mels = 8;
    m.values = Mat(8, 64);
    EXPECT_THROW(dsp::patchify(m), ShapeError);
    m.values = Mat(64, 8);
    EXPECT_THROW(dsp::patchify(m), ShapeError);
}

TEST(Patchify, TimeMajorOrderingAndFlattening) {
    dsp::MelSpectrogram m;
    m.n_mels = 32;
    m.values = Mat(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) m.values.at(r, c) = r * 1000.0 + c;
    dsp::PatchSequence p = dsp::patchify(m);
    ASSERT_EQ(p.count(), 4);
    // Patch 1 is frequency block 1 of time block 0.
    EXPECT_EQ(p.patches.at(1, 0), 16 * 1000.0 + 0);
    // Patch 2 is frequency block 0 of time block 1.
    EXPECT_EQ(p.patches.at(2, 0), 0 * 1000.0 + 16);
    // Within-patch: row-major, mel row outer, frame inner.
    EXPECT_EQ(p.patches.at(0, 16 * 1 + 2), 1 * 1000.0 + 2);
}

// ---- patch-count invariant over random shapes ----

TEST(Patchify, PatchCountInvariantOverRandomShapes) {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int rows = 16 + static_cast<int>(rng.below(120));
        const int cols = 16 + static_cast<int>(rng.below(200));
        dsp::MelSpectrogram m;
        m.n_mels = rows;
        m.values = Mat(rows, cols);
        dsp::PatchSequence p = dsp::patchify(m);
        EXPECT_EQ(p.count(), (rows / 16) * (cols / 16));
        EXPECT_EQ(p.patches.cols, 256);
    }
}

// ---- modulation spectrogram ----

TEST(ModSpec, OutputShapeFromFftSizes) {
    dsp::AudioClip c = sine(800.0, 2.0, 16000);
    dsp::ModSpecConfig cfg;
    cfg.nfft_acoustic = 512;
    cfg.nfft_mod = 512;
    dsp::ModulationSpectrogram m = dsp::modulation_spectrogram(c, cfg);
    EXPECT_EQ(m.values.rows, 257);
    EXPECT_EQ(m.values.cols, 257);
}

TEST(ModSpec, ConstantSignalConcentratesAtZeroModulation) {
    dsp::AudioClip c;
    c.sample_rate = 16000;
    c.samples.assign(32000, 0.25);
    dsp::ModSpecConfig cfg;
    cfg.nfft_mod = 256;
    dsp::ModulationSpectrogram m = dsp::modulation_spectrogram(c, cfg);
    // Every row with any energy must have its maximum at f_mod = 0.
    for (int r = 0; r < m.values.rows; ++r) {
        double row_max = 0.0;
        int arg = 0;
        for (int j = 0; j < m.values.cols; ++j)
            if (m.values.at(r, j) > row_max) {
                row_max = m.values.at(r, j);
                arg = j;
            }
        if (row_max > 1e-9) EXPECT_EQ(arg, 0) << "row " << r;
    }
}

TEST(ModSpec, AmToneOracleFindsModulationRate) {
    // 2 kHz carrier with 8 Hz amplitude modulation.
    dsp::AudioClip c = synth::am_tone(2000.0, 8.0, 0.8, 3.0);
    dsp::ModSpecConfig cfg;  // 512-point acoustic FFT, 512-point temporal FFT
    dsp::ModulationSpectrogram m = dsp::modulation_spectrogram(c, cfg);
    const int carrier_row = static_cast<int>(std::lround(2000.0 / m.acoustic_bin_hz));
    int arg = 1;
    for (int j = 1; j < m.values.cols; ++j)
        if (m.values.at(carrier_row, j) > m.values.at(carrier_row, arg)) arg = j;
    const int expected = static_cast<int>(std::lround(8.0 / m.mod_bin_hz));
    EXPECT_EQ(arg, expected);
    EXPECT_NEAR(arg * m.mod_bin_hz, 8.0, m.mod_bin_hz);
}

TEST(ModSpec, ScalingCovariance) {
    Rng rng(5);
    dsp::AudioClip c = synth::filtered_noise(rng, 1.5, 16000, 3000.0, 0.4);
    dsp::ModulationSpectrogram m1 = dsp::modulation_spectrogram(c);
    dsp::AudioClip c2 = c;
    for (auto& s : c2.samples) s *= 3.0;
    dsp::ModulationSpectrogram m2 = dsp::modulation_spectrogram(c2);
    ASSERT_EQ(m1.values.size(), m2.values.size());
    for (size_t i = 0; i < m1.values.size(); ++i)
        EXPECT_NEAR(m2.values.v[i], 3.0 * m1.values.v[i], 1e-9 * (1.0 + std::abs(m1.values.v[i])));
}

TEST(ModSpec, EnergyMonotoneInInputScale) {
    Rng rng(6);
    dsp::AudioClip c = synth::filtered_noise(rng, 1.0, 16000, 2000.0, 0.3);
    double prev = 0.0;
    for (double a : {0.5, 1.0, 2.0, 4.0}) {
        dsp::AudioClip cs = c;
        for (auto& s : cs.samples) s *= a;
        const double e = dsp::modulation_spectrogram(cs).values.sum();
        EXPECT_GE(e, prev);
        prev = e;
    }
}

TEST(ModSpec, ShortClipZeroPadsAndFlags) {
    dsp::AudioClip c = sine(1000.0, 0.5, 16000);  // fewer frames than nfft_mod
    dsp::ModulationSpectrogram m = dsp::modulation_spectrogram(c);
    EXPECT_TRUE(m.zero_padded);
    EXPECT_EQ(m.segments_averaged, 1);
    for (double v : m.values.v) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
}

TEST(ModSpec, EmptyClipRejected) {
    dsp::AudioClip c;
    c.sample_rate = 16000;
    EXPECT_THROW(dsp::modulation_spectrogram(c), InputError);
}

// ---- msab ----

TEST(Msab, Map256x256Gives512Dims) {
    dsp::ModulationSpectrogram m;
    m.values = Mat(256, 256, 0.5);
    EXPECT_EQ(dsp::msab(m).dim(), 512);
}

TEST(Msab, ZeroMatrixGivesZeroVector) {
    dsp::ModulationSpectrogram m;
    m.values = Mat(64, 32);
    dsp::MSABVector v = dsp::msab(m);
    ASSERT_EQ(v.dim(), 96);
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(Msab, ConstantMatrixGivesLog1pEverywhere) {
    dsp::ModulationSpectrogram m;
    m.values = Mat::full(16, 48, 2.0);
    dsp::MSABVector v = dsp::msab(m);
    ASSERT_EQ(v.dim(), 64);
    for (double x : v.values) EXPECT_NEAR(x, std::log1p(2.0), 1e-12);
}

TEST(Msab, PipelineResolutionControlsDimension) {
    dsp::AudioClip c = sine(1200.0, 1.0, 16000);
    EXPECT_EQ(dsp::msab_features(c, 256).dim(), 512);
    EXPECT_EQ(dsp::msab_features(c, 128).dim(), 256);
    dsp::ModulationSpectrogram map = dsp::modulation_map(c, 256);
    EXPECT_EQ(map.values.rows, 256);
    EXPECT_EQ(map.values.cols, 256);
}

// ---- determinism ----

TEST(Dsp, DeterministicBitIdenticalOutputs) {
    Rng rng(12);
    dsp::AudioClip c = synth::training_clip(rng, 1.0);
    dsp::MelSpectrogram m1 = dsp::mel_spectrogram(c);
    dsp::MelSpectrogram m2 = dsp::mel_spectrogram(c);
    EXPECT_EQ(m1.values.v, m2.values.v);
    dsp::ModulationSpectrogram s1 = dsp::modulation_spectrogram(c);
    dsp::ModulationSpectrogram s2 = dsp::modulation_spectrogram(c);
    EXPECT_EQ(s1.values.v, s2.values.v);
    dsp::AudioClip r1 = dsp::resample(c, 22050);
    dsp::AudioClip r2 = dsp::resample(c, 22050);
    EXPECT_EQ(r1.samples, r2.samples);
}
