#pragma once

#include "biome/dsp.hpp"

namespace biome::synth {

inline dsp::AudioClip tone(double freq_hz, double seconds, int sample_rate = 16000,
                           double amplitude = 0.5, double phase = 0.0) {
    dsp::AudioClip c;
    c.sample_rate = sample_rate;
    const auto n = static_cast<size_t>(std::lround(seconds * sample_rate));
    c.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        c.samples[i] = amplitude * std::sin(2.0 * kPi * freq_hz * i / sample_rate + phase);
    return c;
}

// Carrier with sinusoidal amplitude modulation: (1 + depth*sin(2*pi*rate*t)).
inline dsp::AudioClip am_tone(double carrier_hz, double am_rate_hz, double depth,
                              double seconds, int sample_rate = 16000, double amplitude = 0.4,
                              double phase = 0.0) {
    dsp::AudioClip c;
    c.sample_rate = sample_rate;
    const auto n = static_cast<size_t>(std::lround(seconds * sample_rate));
    c.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double env = 1.0 + depth * std::sin(2.0 * kPi * am_rate_hz * t);
        c.samples[i] = amplitude * env * std::sin(2.0 * kPi * carrier_hz * t + phase);
    }
    return c;
}

// White noise through a one-pole lowpass.
inline dsp::AudioClip filtered_noise(Rng& rng, double seconds, int sample_rate = 16000,
                                     double cutoff_hz = 2000.0, double amplitude = 0.3) {
    dsp::AudioClip c;
    c.sample_rate = sample_rate;
    const auto n = static_cast<size_t>(std::lround(seconds * sample_rate));
    c.samples.resize(n);
    const double a = std::exp(-2.0 * kPi * cutoff_hz / sample_rate);
    double y = 0.0;
    for (size_t i = 0; i < n; ++i) {
        y = a * y + (1.0 - a) * rng.normal();
        c.samples[i] = amplitude * y;
    }
    return c;
}

// Mixed synthetic clip for distillation batches: a tone, an AM tone, or
// band-limited noise, uniformly chosen, with light background noise.
inline dsp::AudioClip training_clip(Rng& rng, double seconds, int sample_rate = 16000) {
    dsp::AudioClip c;
    switch (rng.below(3)) {
        case 0:
            c = tone(rng.uniform(200.0, 6000.0), seconds, sample_rate, rng.uniform(0.2, 0.7),
                     rng.uniform(0.0, 2.0 * kPi));
            break;
        case 1:
            c = am_tone(rng.uniform(500.0, 5000.0), rng.uniform(2.0, 40.0), rng.uniform(0.3, 0.9),
                        seconds, sample_rate, rng.uniform(0.2, 0.6), rng.uniform(0.0, 2.0 * kPi));
            break;
        default:
            c = filtered_noise(rng, seconds, sample_rate, rng.uniform(500.0, 6000.0),
                               rng.uniform(0.2, 0.5));
            break;
    }
    Rng noise = rng.fork(17);
    for (auto& s : c.samples) s += 0.01 * noise.normal();
    return c;
}

// Class-conditional task clips: each class has a distinct AM rate, carriers
// vary freely, so only the modulation rate separates the classes.
inline double am_rate_for_class(int cls) {
    static const double rates[] = {4.0, 10.0, 25.0, 45.0, 60.0};
    return rates[cls % 5];
}

inline dsp::AudioClip am_task_clip(int cls, Rng& rng, double seconds = 2.0,
                                   int sample_rate = 16000) {
    dsp::AudioClip c = am_tone(rng.uniform(600.0, 4500.0), am_rate_for_class(cls), 0.9, seconds,
                               sample_rate, rng.uniform(0.3, 0.6), rng.uniform(0.0, 2.0 * kPi));
    Rng noise = rng.fork(29);
    for (auto& s : c.samples) s += 0.005 * noise.normal();
    return c;
}

}  // namespace biome::synth
