#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsrl/autoencoder.hpp"
#include "dsrl/env.hpp"
#include "dsrl/tensor.hpp"

namespace dsrl {

template <typename T>
T spectrum_ssd(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("spectrum_ssd: length mismatch");
    T s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        T d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// One extracted symbol: a representative pixel, its activation spectrum and
/// (once typed) a persistent type id. Type 0 is reserved for "no object".
template <typename T>
struct DetectedObject {
    int px = 0, py = 0;    // representative pixel (frame coordinates)
    CellPos cell{0, 0};    // px/5, py/5
    std::vector<T> spectrum;
    int type = 0;
};

/// Per-channel activation of a frame with nothing in it. Deviation from these
/// resting levels is the saliency signal; far from any object it is exactly 0.
template <typename T>
std::vector<T> resting_levels(Autoencoder<T>& model) {
    const auto& stack = model.encode(Frame(model.width(), model.height()));
    std::vector<T> rest(static_cast<std::size_t>(model.features()));
    const int plane = model.height() * model.width();
    for (int c = 0; c < model.features(); ++c)
        rest[static_cast<std::size_t>(c)] = stack[static_cast<std::size_t>(c) * plane];
    return rest;
}

/// Finds one representative pixel per object. Saliency is the largest
/// above-rest feature activation; candidates are suppressed to one per
/// disjoint 5x5 window (the stencil pitch) by reading the window's central
/// pixel, whose receptive field cannot overlap a neighbouring window.
template <typename T>
std::vector<DetectedObject<T>> detect(const Tensor<T>& stack, T theta_sal,
                                      const std::vector<T>& rest) {
    if (stack.rank() != 3) throw std::invalid_argument("detect: stack must be (F,H,W)");
    int f = stack.dim(0), h = stack.dim(1), w = stack.dim(2);
    if (rest.size() != static_cast<std::size_t>(f))
        throw std::invalid_argument("detect: resting-level count mismatch");
    if (h % kCellPx != 0 || w % kCellPx != 0)
        throw std::invalid_argument("detect: frame dims not a multiple of the window size");
    const int plane = h * w;
    std::vector<DetectedObject<T>> out;
    for (int wy = 0; wy < h / kCellPx; ++wy) {
        for (int wx = 0; wx < w / kCellPx; ++wx) {
            int px = wx * kCellPx + kCellPx / 2;
            int py = wy * kCellPx + kCellPx / 2;
            T sal = -1;
            for (int c = 0; c < f; ++c) {
                T d = stack[static_cast<std::size_t>(c) * plane + py * w + px] -
                      rest[static_cast<std::size_t>(c)];
                if (d > sal) sal = d;
            }
            if (sal <= theta_sal) continue;
            DetectedObject<T> det;
            det.px = px;
            det.py = py;
            det.cell = {wx, wy};
            det.spectrum.resize(static_cast<std::size_t>(f));
            for (int c = 0; c < f; ++c)
                det.spectrum[static_cast<std::size_t>(c)] =
                    stack[static_cast<std::size_t>(c) * plane + py * w + px];
            out.push_back(std::move(det));
        }
    }
    return out;
}

/// Known types with running-mean prototype spectra. Matching is nearest
/// prototype by SSD; anything farther than theta_type from every prototype
/// founds a new type.
template <typename T>
class TypeRegistry {
public:
    struct Entry {
        int id = 0;
        std::vector<T> prototype;
        std::uint64_t count = 0;
    };

    TypeRegistry() = default;
    TypeRegistry(T theta_sal, T theta_type) : theta_sal_(theta_sal), theta_type_(theta_type) {}

    T theta_sal() const { return theta_sal_; }
    T theta_type() const { return theta_type_; }
    const std::vector<Entry>& entries() const { return entries_; }
    int num_types() const { return static_cast<int>(entries_.size()); }

    /// Matches or founds a type; prototypes track the running mean of their
    /// member spectra.
    int assign_type(const std::vector<T>& spectrum) {
        auto [idx, ssd] = nearest(spectrum);
        if (idx >= 0 && ssd <= theta_type_) {
            Entry& e = entries_[static_cast<std::size_t>(idx)];
            e.count += 1;
            T inv = T(1) / static_cast<T>(e.count);
            for (std::size_t i = 0; i < spectrum.size(); ++i)
                e.prototype[i] += (spectrum[i] - e.prototype[i]) * inv;
            return e.id;
        }
        Entry e;
        e.id = static_cast<int>(entries_.size()) + 1;
        e.prototype = spectrum;
        e.count = 1;
        entries_.push_back(std::move(e));
        return entries_.back().id;
    }

    /// Read-only nearest-prototype lookup; 0 when nothing is close enough.
    int classify(const std::vector<T>& spectrum) const {
        auto [idx, ssd] = nearest(spectrum);
        if (idx >= 0 && ssd <= theta_type_) return entries_[static_cast<std::size_t>(idx)].id;
        return 0;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("TypeRegistry::save: cannot open " + path);
        out.precision(9);
        out << "theta_sal " << theta_sal_ << "\n";
        out << "theta_type " << theta_type_ << "\n";
        out << "types " << entries_.size() << "\n";
        for (const auto& e : entries_) {
            out << e.id << ' ' << e.count << ' ' << e.prototype.size();
            for (T v : e.prototype) out << ' ' << v;
            out << "\n";
        }
        if (!out) throw std::runtime_error("TypeRegistry::save: write failed");
    }

    static TypeRegistry load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("TypeRegistry::load: cannot open " + path);
        TypeRegistry r;
        std::string key;
        std::size_t n = 0;
        if (!(in >> key >> r.theta_sal_) || key != "theta_sal")
            throw std::runtime_error("TypeRegistry::load: bad header");
        if (!(in >> key >> r.theta_type_) || key != "theta_type")
            throw std::runtime_error("TypeRegistry::load: bad header");
        if (!(in >> key >> n) || key != "types")
            throw std::runtime_error("TypeRegistry::load: bad header");
        for (std::size_t i = 0; i < n; ++i) {
            Entry e;
            std::size_t flen = 0;
            if (!(in >> e.id >> e.count >> flen))
                throw std::runtime_error("TypeRegistry::load: truncated record");
            e.prototype.resize(flen);
            for (std::size_t k = 0; k < flen; ++k)
                if (!(in >> e.prototype[k]))
                    throw std::runtime_error("TypeRegistry::load: truncated prototype");
            if (e.id != static_cast<int>(i) + 1)
                throw std::runtime_error("TypeRegistry::load: type ids must be dense from 1");
            r.entries_.push_back(std::move(e));
        }
        return r;
    }

private:
    std::pair<int, T> nearest(const std::vector<T>& spectrum) const {
        int best = -1;
        T best_ssd = 0;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].prototype.size() != spectrum.size())
                throw std::invalid_argument("TypeRegistry: spectrum length mismatch");
            T ssd = spectrum_ssd(spectrum, entries_[i].prototype);
            if (best < 0 || ssd < best_ssd) {
                best = static_cast<int>(i);
                best_ssd = ssd;
            }
        }
        return {best, best_ssd};
    }

    T theta_sal_ = 0;
    T theta_type_ = 0;
    std::vector<Entry> entries_;
};

/// Thresholds derived from the model itself: render each glyph in isolation,
/// read its exact center response, and place both thresholds at half the
/// smallest relevant margin.
template <typename T>
struct PerceptionCalibration {
    T theta_sal = 0;
    T theta_type = 0;
    std::vector<T> rest;
    T min_center_saliency = 0;   // weakest glyph response, for diagnostics
    T min_inter_ssd = 0;         // closest prototype pair, for diagnostics
};

template <typename T>
PerceptionCalibration<T> calibrate_perception(Autoencoder<T>& model) {
    if (model.width() % kCellPx != 0 || model.height() % kCellPx != 0)
        throw std::invalid_argument("calibrate_perception: frame dims not cell-aligned");
    PerceptionCalibration<T> cal;
    cal.rest = resting_levels(model);
    int grid_w = model.width() / kCellPx, grid_h = model.height() / kCellPx;
    CellPos mid{grid_w / 2, grid_h / 2};
    std::vector<std::vector<T>> protos;
    const int plane = model.height() * model.width();
    for (Glyph g : {Glyph::Agent, Glyph::Cross, Glyph::Circle}) {
        const auto& stack = model.encode(render_scene(grid_w, grid_h, {{mid, g}}));
        int px = mid.x * kCellPx + kCellPx / 2, py = mid.y * kCellPx + kCellPx / 2;
        std::vector<T> sp(static_cast<std::size_t>(model.features()));
        T sal = -1;
        for (int c = 0; c < model.features(); ++c) {
            sp[static_cast<std::size_t>(c)] =
                stack[static_cast<std::size_t>(c) * plane + py * model.width() + px];
            T d = sp[static_cast<std::size_t>(c)] - cal.rest[static_cast<std::size_t>(c)];
            if (d > sal) sal = d;
        }
        if (g == Glyph::Agent || sal < cal.min_center_saliency) cal.min_center_saliency = sal;
        protos.push_back(std::move(sp));
    }
    if (cal.min_center_saliency <= 0)
        throw std::runtime_error("calibrate_perception: a glyph produces no positive response");
    cal.min_inter_ssd = -1;
    for (std::size_t a = 0; a < protos.size(); ++a)
        for (std::size_t b = a + 1; b < protos.size(); ++b) {
            T ssd = spectrum_ssd(protos[a], protos[b]);
            if (cal.min_inter_ssd < 0 || ssd < cal.min_inter_ssd) cal.min_inter_ssd = ssd;
        }
    if (cal.min_inter_ssd <= 0)
        throw std::runtime_error("calibrate_perception: glyph spectra are not distinct");
    cal.theta_sal = cal.min_center_saliency / 2;
    cal.theta_type = cal.min_inter_ssd / 2;
    return cal;
}

/// encode -> detect -> assign_type. Registry grows when new spectra appear.
template <typename T>
std::vector<DetectedObject<T>> symbolize(const Frame& frame, Autoencoder<T>& model,
                                         TypeRegistry<T>& registry,
                                         const std::vector<T>& rest) {
    auto objects = detect(model.encode(frame), registry.theta_sal(), rest);
    for (auto& o : objects) o.type = registry.assign_type(o.spectrum);
    return objects;
}

/// Read-only variant for evaluation: classifies against the registry as it
/// stands, leaving prototypes and counts untouched.
template <typename T>
std::vector<DetectedObject<T>> symbolize_frozen(const Frame& frame, Autoencoder<T>& model,
                                                const TypeRegistry<T>& registry,
                                                const std::vector<T>& rest) {
    auto objects = detect(model.encode(frame), registry.theta_sal(), rest);
    for (auto& o : objects) o.type = registry.classify(o.spectrum);
    return objects;
}

} // namespace dsrl
