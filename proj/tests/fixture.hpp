#pragma once

#include <cstdio>
#include <fstream>
#include <vector>

#include "dsrl/autoencoder.hpp"
#include "dsrl/env.hpp"
#include "dsrl/rng.hpp"
#include "dsrl/symbols.hpp"

namespace dsrl::testfix {

/// A modest pretraining run shared by the perception-layer test binaries.
/// Parameters and the loss curve are cached next to the test executables so
/// repeated runs skip the training step; delete ae_fixture.* to force one.
struct Pretrain {
    Autoencoder<float> model;
    std::vector<float> curve;
    std::vector<Frame> train_frames;
    std::vector<Frame> holdout;
    float holdout_mse = 0;
};

inline constexpr int kFixtureFrames = 1500;
inline constexpr int kFixtureEpochs = 20;
inline constexpr float kFixtureLr = 0.1f;

inline const Pretrain& small_pretrain() {
    static const Pretrain fix = [] {
        Pretrain r;
        Rng rng(0xA11CE5EEDull);
        auto frames = generate_training_set(kFixtureFrames, rng);
        std::size_t cut = frames.size() - frames.size() / 10;
        r.train_frames.assign(frames.begin(), frames.begin() + static_cast<long>(cut));
        r.holdout.assign(frames.begin() + static_cast<long>(cut), frames.end());
        r.model = Autoencoder<float>(8, 50, 50, rng);

        bool cached = false;
        std::ifstream meta("ae_fixture_curve.txt");
        if (meta) {
            std::vector<float> curve;
            float v;
            while (meta >> v) curve.push_back(v);
            if (curve.size() == kFixtureEpochs) {
                try {
                    r.model.load("ae_fixture.bin");
                    r.curve = curve;
                    cached = true;
                } catch (const std::exception&) {
                }
            }
        }
        if (!cached) {
            r.curve = r.model.train(r.train_frames, kFixtureEpochs, kFixtureLr, 16, rng);
            r.model.save("ae_fixture.bin.tmp");
            std::rename("ae_fixture.bin.tmp", "ae_fixture.bin");
            std::ofstream out("ae_fixture_curve.txt.tmp");
            for (float v : r.curve) out << v << "\n";
            out.close();
            std::rename("ae_fixture_curve.txt.tmp", "ae_fixture_curve.txt");
        }
        r.holdout_mse = r.model.mean_mse(r.holdout);
        return r;
    }();
    return fix;
}

/// Calibrated perception over the shared fixture model. The model pointer is
/// mutable because encode() reuses internal scratch buffers.
struct Perception {
    Autoencoder<float>* model;
    PerceptionCalibration<float> cal;
    TypeRegistry<float> fresh_registry() const { return {cal.theta_sal, cal.theta_type}; }
};

inline const Perception& perception() {
    static const Perception p = [] {
        auto& model = const_cast<Autoencoder<float>&>(small_pretrain().model);
        return Perception{&model, calibrate_perception(model)};
    }();
    return p;
}

} // namespace dsrl::testfix
