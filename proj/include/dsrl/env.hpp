#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsrl/rng.hpp"

namespace dsrl {

// The four benchmark games. Grid* use a fixed lattice layout, Random* draw
// object positions fresh from the seed for every new game.
enum class Variant { GridNeg, GridMixed, RandomNeg, RandomMixed };

enum class Glyph { Agent, Cross, Circle };

enum class Action { Up, Down, Left, Right };
inline constexpr int kNumActions = 4;

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::GridNeg: return "grid-neg";
        case Variant::GridMixed: return "grid-mixed";
        case Variant::RandomNeg: return "random-neg";
        case Variant::RandomMixed: return "random-mixed";
    }
    return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
    if (s == "grid-neg") return Variant::GridNeg;
    if (s == "grid-mixed") return Variant::GridMixed;
    if (s == "random-neg") return Variant::RandomNeg;
    if (s == "random-mixed") return Variant::RandomMixed;
    return std::nullopt;
}

struct CellPos {
    int x = 0;
    int y = 0;
    friend bool operator==(const CellPos& a, const CellPos& b) = default;
};

// Collecting a cross pays +1, running into a circle costs 1.
inline int glyph_reward(Glyph g) {
    switch (g) {
        case Glyph::Cross: return 1;
        case Glyph::Circle: return -1;
        default: return 0;
    }
}

inline constexpr int kCellPx = 5;

/// 5x5 binary pixel stencil for a glyph, row major.
inline const std::array<std::uint8_t, 25>& glyph_stencil(Glyph g) {
    static const std::array<std::uint8_t, 25> agent = {
        0, 0, 1, 0, 0,
        0, 0, 1, 0, 0,
        1, 1, 1, 1, 1,
        0, 0, 1, 0, 0,
        0, 0, 1, 0, 0,
    };
    static const std::array<std::uint8_t, 25> cross = {
        1, 0, 0, 0, 1,
        0, 1, 0, 1, 0,
        0, 0, 1, 0, 0,
        0, 1, 0, 1, 0,
        1, 0, 0, 0, 1,
    };
    static const std::array<std::uint8_t, 25> circle = {
        0, 1, 1, 1, 0,
        1, 0, 0, 0, 1,
        1, 0, 0, 0, 1,
        1, 0, 0, 0, 1,
        0, 1, 1, 1, 0,
    };
    switch (g) {
        case Glyph::Agent: return agent;
        case Glyph::Cross: return cross;
        default: return circle;
    }
}

/// Grayscale pixel grid in [0,1]; the only observation the learning
/// pipeline ever sees. Background is exactly 0, stencil pixels exactly 1.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<float> pixels; // row major

    Frame() = default;
    Frame(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0.0f) {}

    float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }

    friend bool operator==(const Frame& a, const Frame& b) = default;
};

/// Blits glyph stencils into their cells. Cells outside the grid are a
/// contract violation.
inline Frame render_scene(int grid_w, int grid_h,
                          const std::vector<std::pair<CellPos, Glyph>>& scene) {
    Frame f(grid_w * kCellPx, grid_h * kCellPx);
    for (const auto& [cell, glyph] : scene) {
        if (cell.x < 0 || cell.x >= grid_w || cell.y < 0 || cell.y >= grid_h)
            throw std::invalid_argument("render_scene: cell outside grid");
        const auto& st = glyph_stencil(glyph);
        int px0 = cell.x * kCellPx;
        int py0 = cell.y * kCellPx;
        for (int sy = 0; sy < kCellPx; ++sy)
            for (int sx = 0; sx < kCellPx; ++sx)
                if (st[sy * kCellPx + sx]) f.at(px0 + sx, py0 + sy) = 1.0f;
    }
    return f;
}

struct StepOutcome {
    int reward = 0;
    Frame frame;
    std::optional<Glyph> collected;
    bool terminal = false;
};

struct GameConfig {
    int grid_w = 10;
    int grid_h = 10;
    int episode_steps = 100;
    int random_objects = 12;  // object count in the random variants
};

/// Deterministic, seedable grid game. One object per cell at most; the agent
/// consumes an object by stepping onto its cell. Moves off the board clamp.
class GridGame {
public:
    struct Object {
        CellPos pos;
        Glyph glyph;
    };

    GridGame(Variant variant, std::uint64_t seed, GameConfig cfg = {})
        : cfg_(cfg), variant_(variant) {
        Rng rng(derive_seed(seed, 0x67616d65ULL));
        switch (variant) {
            case Variant::GridNeg:
            case Variant::GridMixed:
                init_lattice(variant == Variant::GridMixed);
                break;
            case Variant::RandomNeg:
            case Variant::RandomMixed:
                init_random(variant == Variant::RandomMixed, rng);
                break;
        }
    }

    StepOutcome step(Action action) {
        if (terminal_) throw std::logic_error("GridGame::step: game is terminal");
        CellPos dest = agent_;
        switch (action) {
            case Action::Up: dest.y -= 1; break;
            case Action::Down: dest.y += 1; break;
            case Action::Left: dest.x -= 1; break;
            case Action::Right: dest.x += 1; break;
        }
        dest.x = std::min(std::max(dest.x, 0), cfg_.grid_w - 1);
        dest.y = std::min(std::max(dest.y, 0), cfg_.grid_h - 1);
        agent_ = dest;

        StepOutcome out;
        for (size_t i = 0; i < objects_.size(); ++i) {
            if (objects_[i].pos == dest) {
                out.reward = glyph_reward(objects_[i].glyph);
                out.collected = objects_[i].glyph;
                if (out.reward > 0)
                    ++positives_collected_;
                else
                    ++negatives_collected_;
                objects_.erase(objects_.begin() + static_cast<std::ptrdiff_t>(i));
                break;
            }
        }
        score_ += out.reward;
        ++steps_;
        terminal_ = steps_ >= cfg_.episode_steps;
        out.terminal = terminal_;
        out.frame = render();
        return out;
    }

    Frame render() const { return render_scene(cfg_.grid_w, cfg_.grid_h, ground_truth()); }

    /// Exact inventory including the agent. Test oracle for the perception
    /// modules; the learning pipeline never sees it.
    std::vector<std::pair<CellPos, Glyph>> ground_truth() const {
        std::vector<std::pair<CellPos, Glyph>> out;
        out.reserve(objects_.size() + 1);
        for (const auto& o : objects_) out.emplace_back(o.pos, o.glyph);
        out.emplace_back(agent_, Glyph::Agent);
        return out;
    }

    const GameConfig& config() const { return cfg_; }
    Variant variant() const { return variant_; }
    CellPos agent_pos() const { return agent_; }
    const std::vector<Object>& objects() const { return objects_; }
    int steps() const { return steps_; }
    int score() const { return score_; }
    int positives_collected() const { return positives_collected_; }
    int negatives_collected() const { return negatives_collected_; }
    bool terminal() const { return terminal_; }

private:
    void init_lattice(bool mixed) {
        agent_ = {cfg_.grid_w / 2, cfg_.grid_h / 2};
        for (int y = 1; y < cfg_.grid_h; y += 2) {
            for (int x = 1; x < cfg_.grid_w; x += 2) {
                CellPos cell{x, y};
                if (cell == agent_) continue;
                Glyph g = Glyph::Circle;
                if (mixed && ((x / 2 + y / 2) % 2 != 0)) g = Glyph::Cross;
                objects_.push_back({cell, g});
            }
        }
    }

    void init_random(bool mixed, Rng& rng) {
        std::vector<CellPos> cells;
        cells.reserve(static_cast<size_t>(cfg_.grid_w) * cfg_.grid_h);
        for (int y = 0; y < cfg_.grid_h; ++y)
            for (int x = 0; x < cfg_.grid_w; ++x) cells.push_back({x, y});
        // partial Fisher-Yates: first (objects + 1) slots end up uniform distinct
        int wanted = cfg_.random_objects + 1;
        for (int i = 0; i < wanted; ++i) {
            size_t j = i + rng.uniform_index(cells.size() - static_cast<size_t>(i));
            std::swap(cells[static_cast<size_t>(i)], cells[j]);
        }
        for (int i = 0; i < cfg_.random_objects; ++i) {
            Glyph g = Glyph::Circle;
            if (mixed && i >= cfg_.random_objects / 2) g = Glyph::Cross;
            objects_.push_back({cells[static_cast<size_t>(i)], g});
        }
        agent_ = cells[static_cast<size_t>(cfg_.random_objects)];
    }

    GameConfig cfg_;
    Variant variant_;
    CellPos agent_;
    std::vector<Object> objects_;
    int steps_ = 0;
    int score_ = 0;
    int positives_collected_ = 0;
    int negatives_collected_ = 0;
    bool terminal_ = false;
};

// --- PGM export (binary P5, maxval 255) ---

inline std::string to_pgm(const Frame& f) {
    std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
    out.reserve(out.size() + f.pixels.size());
    for (float p : f.pixels) {
        int v = static_cast<int>(p * 255.0f + 0.5f);
        v = std::min(std::max(v, 0), 255);
        out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
    return out;
}

inline void write_pgm(const Frame& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    std::string bytes = to_pgm(f);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace dsrl
