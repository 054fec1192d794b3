#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsrl/env.hpp"
#include "dsrl/symbols.hpp"

namespace dsrl {

/// Counts of observed type->type transitions over {0..K}, where type 0 means
/// "not present" (appearance = 0->t, disappearance = t->0). Bootstrapped with
/// a count of 1 everywhere plus 5 extra on the diagonal, so unseen objects
/// mildly prefer to keep their type. The probability view normalizes rows.
class TransitionMatrix {
public:
    static constexpr std::uint64_t kPriorOff = 1;
    static constexpr std::uint64_t kPriorDiagExtra = 5;

    explicit TransitionMatrix(int num_real_types) {
        if (num_real_types < 1)
            throw std::invalid_argument("TransitionMatrix: need at least one real type");
        grow(num_real_types + 1);
    }

    int dim() const { return dim_; }

    /// Expands the matrix so `type` is a valid row/column, seeding new cells
    /// with the prior.
    void ensure_type(int type) {
        if (type < 0) throw std::invalid_argument("TransitionMatrix: negative type");
        if (type >= dim_) grow(type + 1);
    }

    std::uint64_t count(int from, int to) const {
        check(from);
        check(to);
        return counts_[static_cast<std::size_t>(from) * dim_ + to];
    }

    void record(int from, int to) {
        check(from);
        check(to);
        counts_[static_cast<std::size_t>(from) * dim_ + to] += 1;
        row_sums_[static_cast<std::size_t>(from)] += 1;
    }

    /// Row-normalized transition probability.
    double prob(int from, int to) const {
        check(from);
        check(to);
        return static_cast<double>(counts_[static_cast<std::size_t>(from) * dim_ + to]) /
               static_cast<double>(row_sums_[static_cast<std::size_t>(from)]);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("TransitionMatrix::save: cannot open " + path);
        out << "dim " << dim_ << "\n";
        for (int r = 0; r < dim_; ++r) {
            out << "row";
            for (int c = 0; c < dim_; ++c)
                out << ' ' << counts_[static_cast<std::size_t>(r) * dim_ + c];
            out << "\n";
        }
        if (!out) throw std::runtime_error("TransitionMatrix::save: write failed");
    }

    static TransitionMatrix load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("TransitionMatrix::load: cannot open " + path);
        std::string key;
        int dim = 0;
        if (!(in >> key >> dim) || key != "dim" || dim < 2)
            throw std::runtime_error("TransitionMatrix::load: bad header");
        TransitionMatrix m(dim - 1);
        for (int r = 0; r < dim; ++r) {
            if (!(in >> key) || key != "row")
                throw std::runtime_error("TransitionMatrix::load: missing row");
            for (int c = 0; c < dim; ++c) {
                std::uint64_t v = 0;
                if (!(in >> v)) throw std::runtime_error("TransitionMatrix::load: truncated row");
                m.counts_[static_cast<std::size_t>(r) * dim + c] = v;
            }
        }
        for (int r = 0; r < dim; ++r) {
            std::uint64_t s = 0;
            for (int c = 0; c < dim; ++c) s += m.counts_[static_cast<std::size_t>(r) * dim + c];
            if (s == 0) throw std::runtime_error("TransitionMatrix::load: empty row");
            m.row_sums_[static_cast<std::size_t>(r)] = s;
        }
        return m;
    }

private:
    void check(int t) const {
        if (t < 0 || t >= dim_) throw std::invalid_argument("TransitionMatrix: unknown type id");
    }

    void grow(int new_dim) {
        std::vector<std::uint64_t> next(static_cast<std::size_t>(new_dim) * new_dim, kPriorOff);
        for (int d = 0; d < new_dim; ++d)
            next[static_cast<std::size_t>(d) * new_dim + d] += kPriorDiagExtra;
        for (int r = 0; r < dim_; ++r)
            for (int c = 0; c < dim_; ++c)
                next[static_cast<std::size_t>(r) * new_dim + c] =
                    counts_[static_cast<std::size_t>(r) * dim_ + c];
        counts_ = std::move(next);
        dim_ = new_dim;
        row_sums_.assign(static_cast<std::size_t>(dim_), 0);
        for (int r = 0; r < dim_; ++r)
            for (int c = 0; c < dim_; ++c)
                row_sums_[static_cast<std::size_t>(r)] +=
                    counts_[static_cast<std::size_t>(r) * dim_ + c];
    }

    int dim_ = 0;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> row_sums_;
};

struct MatchConfig {
    // The type-transition term carries the most weight: when the agent steps
    // onto an object it consumes, the stale object sits at distance 0 from
    // the agent's new detection, and only a strong type prior keeps the
    // assignment honest (agent matches agent, consumed object disappears).
    double w1 = 0.3; // distance term
    double w2 = 0.5; // type-transition term
    double w3 = 0.2; // neighbour-count term
    int d_max = 4;   // neighbour radius, cells
    double l_min = 0.3;

    void validate() const {
        if (w1 < 0 || w2 < 0 || w3 < 0 || std::abs(w1 + w2 + w3 - 1.0) > 1e-9)
            throw std::invalid_argument("MatchConfig: weights must be non-negative and sum to 1");
        if (d_max <= 0) throw std::invalid_argument("MatchConfig: d_max must be positive");
        if (l_min <= 0 || l_min >= 1) throw std::invalid_argument("MatchConfig: l_min outside (0,1)");
    }
};

inline double l_dist(CellPos a, CellPos b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return 1.0 / (1.0 + std::sqrt(dx * dx + dy * dy));
}

inline double l_trans(int from, int to, const TransitionMatrix& m) { return m.prob(from, to); }

inline double l_neigh(int n1, int n2) { return 1.0 / (1.0 + std::abs(n1 - n2)); }

/// An object with a persistent identity within one episode.
struct TrackedObject {
    int id = 0;
    int type = 0;
    CellPos cell{0, 0};
    std::vector<std::pair<int, CellPos>> history; // (type, position) per frame
};

/// A detection reduced to what matching needs.
struct Candidate {
    int type = 0;
    CellPos cell{0, 0};
};

inline double match_likelihood(const TrackedObject& prev, const Candidate& cur, int n_prev,
                               int n_cur, const MatchConfig& cfg, const TransitionMatrix& m) {
    return cfg.w1 * l_dist(prev.cell, cur.cell) + cfg.w2 * l_trans(prev.type, cur.type, m) +
           cfg.w3 * l_neigh(n_prev, n_cur);
}

struct MatchResult {
    std::vector<std::pair<std::size_t, std::size_t>> assignments; // (prev idx, cur idx)
    std::vector<std::size_t> appearances;                         // cur indices
    std::vector<std::size_t> disappearances;                      // prev indices
};

namespace detail {
inline std::vector<int> neighbour_counts(const std::vector<CellPos>& cells, int d_max) {
    std::vector<int> n(cells.size(), 0);
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = i + 1; j < cells.size(); ++j) {
            double dx = cells[i].x - cells[j].x, dy = cells[i].y - cells[j].y;
            if (std::sqrt(dx * dx + dy * dy) <= d_max) {
                ++n[i];
                ++n[j];
            }
        }
    return n;
}
} // namespace detail

/// Greedy descending-likelihood assignment between consecutive frames. Each
/// object participates at most once and pairs below l_min stay unmatched,
/// becoming disappearances (prev side) and appearances (cur side).
inline MatchResult match(const std::vector<TrackedObject>& prev, const std::vector<Candidate>& cur,
                         const MatchConfig& cfg, const TransitionMatrix& m) {
    cfg.validate();
    std::vector<CellPos> pc, cc;
    for (const auto& p : prev) pc.push_back(p.cell);
    for (const auto& c : cur) cc.push_back(c.cell);
    std::vector<int> np = detail::neighbour_counts(pc, cfg.d_max);
    std::vector<int> nc = detail::neighbour_counts(cc, cfg.d_max);

    struct Pair {
        double l;
        std::size_t pi, ci;
    };
    std::vector<Pair> pairs;
    pairs.reserve(prev.size() * cur.size());
    for (std::size_t pi = 0; pi < prev.size(); ++pi)
        for (std::size_t ci = 0; ci < cur.size(); ++ci) {
            double l = match_likelihood(prev[pi], cur[ci], np[pi], nc[ci], cfg, m);
            if (l >= cfg.l_min) pairs.push_back({l, pi, ci});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.l != b.l) return a.l > b.l;
        if (a.pi != b.pi) return a.pi < b.pi;
        return a.ci < b.ci;
    });

    MatchResult res;
    std::vector<bool> pu(prev.size(), false), cu(cur.size(), false);
    for (const auto& p : pairs) {
        if (pu[p.pi] || cu[p.ci]) continue;
        pu[p.pi] = cu[p.ci] = true;
        res.assignments.push_back({p.pi, p.ci});
    }
    for (std::size_t ci = 0; ci < cur.size(); ++ci)
        if (!cu[ci]) res.appearances.push_back(ci);
    for (std::size_t pi = 0; pi < prev.size(); ++pi)
        if (!pu[pi]) res.disappearances.push_back(pi);
    return res;
}

/// Tallies one frame pair's events into the matrix. Must run after matching.
inline void update_transitions(TransitionMatrix& m, const MatchResult& res,
                               const std::vector<TrackedObject>& prev,
                               const std::vector<Candidate>& cur) {
    for (auto [pi, ci] : res.assignments) m.record(prev[pi].type, cur[ci].type);
    for (auto ci : res.appearances) m.record(0, cur[ci].type);
    for (auto pi : res.disappearances) m.record(prev[pi].type, 0);
}

/// Per-episode identity bookkeeping around match(). The transition matrix is
/// shared (it accumulates across episodes); pass learn=false to keep it
/// frozen, e.g. during evaluation games.
class Tracker {
public:
    struct StepResult {
        std::vector<int> matched_ids;
        std::vector<int> appeared_ids;
        std::vector<TrackedObject> departed; // final state of disappeared objects
    };

    Tracker(MatchConfig cfg, TransitionMatrix* shared, bool learn = true)
        : cfg_(cfg), trans_(shared), learn_(learn) {
        cfg_.validate();
        if (trans_ == nullptr) throw std::invalid_argument("Tracker: null transition matrix");
    }

    const std::vector<TrackedObject>& objects() const { return objects_; }

    StepResult step(const std::vector<Candidate>& detections) {
        for (const auto& d : detections) {
            if (d.type < 1) throw std::invalid_argument("Tracker::step: type ids start at 1");
            trans_->ensure_type(d.type);
        }
        MatchResult res = match(objects_, detections, cfg_, *trans_);
        if (learn_) update_transitions(*trans_, res, objects_, detections);

        StepResult out;
        std::vector<TrackedObject> next;
        std::vector<bool> taken(detections.size(), false);
        for (auto [pi, ci] : res.assignments) {
            TrackedObject obj = std::move(objects_[pi]);
            obj.type = detections[ci].type;
            obj.cell = detections[ci].cell;
            obj.history.push_back({obj.type, obj.cell});
            out.matched_ids.push_back(obj.id);
            next.push_back(std::move(obj));
            taken[ci] = true;
        }
        for (auto pi : res.disappearances) out.departed.push_back(std::move(objects_[pi]));
        for (auto ci : res.appearances) {
            TrackedObject obj;
            obj.id = next_id_++;
            obj.type = detections[ci].type;
            obj.cell = detections[ci].cell;
            obj.history.push_back({obj.type, obj.cell});
            out.appeared_ids.push_back(obj.id);
            next.push_back(std::move(obj));
        }
        objects_ = std::move(next);
        return out;
    }

    /// Convenience adapter from the perception layer's detections.
    template <typename T>
    StepResult step(const std::vector<DetectedObject<T>>& detections) {
        std::vector<Candidate> c;
        c.reserve(detections.size());
        for (const auto& d : detections) c.push_back({d.type, d.cell});
        return step(c);
    }

private:
    MatchConfig cfg_;
    TransitionMatrix* trans_;
    bool learn_;
    std::vector<TrackedObject> objects_;
    int next_id_ = 1;
};

} // namespace dsrl
