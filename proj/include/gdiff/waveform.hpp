#pragma once

#include <vector>

namespace gdiff {

// Mono audio segment. Samples are raw amplitudes, nominally in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    double sample_rate = 0.0;

    double duration_seconds() const {
        return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

}  // namespace gdiff
