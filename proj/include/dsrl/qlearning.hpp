#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsrl/representation.hpp"
#include "dsrl/rng.hpp"

namespace dsrl {

/// Two readings of the tabular update. Printed keeps the discount on the
/// whole bracketed difference, Q += a*(r + g*(max - Q)); Textbook is the
/// usual Q += a*(r + g*max - Q). Printed's fixed point is max + r/g, so a
/// chain of self-consistent updates never attenuates: in live play the
/// tables drift toward the r/(1-g) ceiling and the greedy policy drowns.
/// Textbook contracts by g per hop and keeps values on the reward scale,
/// so it is the default; Printed stays available for comparison.
enum class QUpdateForm { Printed, Textbook };

inline const char* update_form_name(QUpdateForm f) {
    return f == QUpdateForm::Printed ? "printed" : "textbook";
}

inline QUpdateForm parse_update_form(const std::string& s) {
    if (s == "printed") return QUpdateForm::Printed;
    if (s == "textbook") return QUpdateForm::Textbook;
    throw std::runtime_error("parse_update_form: unknown form '" + s + "'");
}

struct PolicyConfig {
    double epsilon = 0.1; // 0 for evaluation
    std::uint64_t seed = 0;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw std::invalid_argument("PolicyConfig: epsilon must lie in [0,1]");
    }
};

/// A table lookup key: which pair's table, and where the partner sits.
struct RelevantEntry {
    int other_type = 0;
    InteractionState state;
    friend bool operator==(const RelevantEntry&, const RelevantEntry&) = default;
};

/// One Q table per (agent, partner-type) pair, each over (offset, action).
/// Tables appear lazily on first update and start at zero everywhere.
class QStore {
public:
    QStore(int agent_type, int radius = 3, double alpha = 0.1, double gamma = 0.9,
           QUpdateForm form = QUpdateForm::Textbook)
        : agent_type_(agent_type), radius_(radius), alpha_(alpha), gamma_(gamma), form_(form) {
        if (agent_type < 1) throw std::invalid_argument("QStore: agent type ids start at 1");
        if (radius < 1) throw std::invalid_argument("QStore: radius must be positive");
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw std::invalid_argument("QStore: alpha must lie in (0,1]");
        if (!(gamma >= 0.0 && gamma < 1.0))
            throw std::invalid_argument("QStore: gamma must lie in [0,1)");
    }

    int agent_type() const { return agent_type_; }
    int radius() const { return radius_; }
    double alpha() const { return alpha_; }
    double gamma() const { return gamma_; }
    QUpdateForm form() const { return form_; }
    int side() const { return 2 * radius_ + 1; }

    bool in_radius(InteractionState s) const {
        return std::abs(s.dx) <= radius_ && std::abs(s.dy) <= radius_;
    }

    /// Zero until the pair's table has been written; never allocates.
    double q(int other_type, InteractionState s, Action a) const {
        check_key(other_type, s);
        auto it = tables_.find(other_type);
        if (it == tables_.end()) return 0.0;
        return it->second[index(s, a)];
    }

    double max_q(int other_type, InteractionState s) const {
        double best = q(other_type, s, Action::Up);
        for (int a = 1; a < kNumActions; ++a)
            best = std::max(best, q(other_type, s, static_cast<Action>(a)));
        return best;
    }

    /// Applies one step of the configured update to the event's table.
    /// Contact, disappearance, and an after-offset outside the radius all
    /// end the interaction: the bootstrap max is taken as zero.
    void update(const InteractionEvent& ev, Action action, int reward) {
        if (ev.agent_type != agent_type_)
            throw std::invalid_argument("QStore::update: event pair must lead with the agent type");
        check_key(ev.other_type, ev.before);
        double max_next = 0.0;
        if (ev.has_after && in_radius(ev.after)) max_next = max_q(ev.other_type, ev.after);

        double& cell = table(ev.other_type)[index(ev.before, action)];
        if (form_ == QUpdateForm::Printed)
            cell += alpha_ * (reward + gamma_ * (max_next - cell));
        else
            cell += alpha_ * (reward + gamma_ * max_next - cell);
    }

    const std::map<int, std::vector<double>>& tables() const { return tables_; }

    void save(std::ostream& out) const {
        out << "agent_type " << agent_type_ << "\n";
        out << "radius " << radius_ << "\n";
        out << "alpha " << std::setprecision(17) << alpha_ << "\n";
        out << "gamma " << std::setprecision(17) << gamma_ << "\n";
        out << "form " << update_form_name(form_) << "\n";
        std::size_t records = tables_.size() * static_cast<std::size_t>(side()) * side() * kNumActions;
        out << "records " << records << "\n";
        for (const auto& [other, tab] : tables_) {
            for (int dy = -radius_; dy <= radius_; ++dy)
                for (int dx = -radius_; dx <= radius_; ++dx)
                    for (int a = 0; a < kNumActions; ++a)
                        out << "q " << other << " " << dx << " " << dy << " " << a << " "
                            << std::setprecision(17) << tab[index({dx, dy}, static_cast<Action>(a))]
                            << "\n";
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("QStore::save: cannot open " + path);
        save(out);
    }

    static QStore load(std::istream& in) {
        auto expect = [&](const char* key) {
            std::string word;
            if (!(in >> word) || word != key)
                throw std::runtime_error(std::string("QStore::load: expected '") + key + "'");
        };
        int agent_type = 0, radius = 0;
        double alpha = 0, gamma = 0;
        std::string form_word;
        std::size_t records = 0;
        expect("agent_type");
        in >> agent_type;
        expect("radius");
        in >> radius;
        expect("alpha");
        in >> alpha;
        expect("gamma");
        in >> gamma;
        expect("form");
        in >> form_word;
        expect("records");
        in >> records;
        if (!in) throw std::runtime_error("QStore::load: malformed header");

        QStore store(agent_type, radius, alpha, gamma, parse_update_form(form_word));
        for (std::size_t i = 0; i < records; ++i) {
            std::string tag;
            int other = 0, dx = 0, dy = 0, a = 0;
            double v = 0;
            if (!(in >> tag >> other >> dx >> dy >> a >> v) || tag != "q")
                throw std::runtime_error("QStore::load: malformed record");
            if (other < 1 || other == agent_type)
                throw std::runtime_error("QStore::load: record pair does not partner the agent");
            if (!store.in_radius({dx, dy}))
                throw std::runtime_error("QStore::load: record offset outside radius");
            if (a < 0 || a >= kNumActions)
                throw std::runtime_error("QStore::load: record action out of range");
            store.table(other)[store.index({dx, dy}, static_cast<Action>(a))] = v;
        }
        return store;
    }

    static QStore load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("QStore::load: cannot open " + path);
        return load(in);
    }

private:
    void check_key(int other_type, InteractionState s) const {
        if (other_type < 1) throw std::invalid_argument("QStore: type ids start at 1");
        if (other_type == agent_type_)
            throw std::invalid_argument("QStore: the agent does not pair with itself");
        if (!in_radius(s)) throw std::invalid_argument("QStore: offset outside radius");
    }

    std::vector<double>& table(int other_type) {
        return tables_
            .try_emplace(other_type,
                         static_cast<std::size_t>(side()) * side() * kNumActions, 0.0)
            .first->second;
    }

    int index(InteractionState s, Action a) const {
        return ((s.dy + radius_) * side() + (s.dx + radius_)) * kNumActions +
               static_cast<int>(a);
    }

    int agent_type_;
    int radius_;
    double alpha_;
    double gamma_;
    QUpdateForm form_;
    std::map<int, std::vector<double>> tables_;
};

/// Table keys for everything currently in view, one per event.
inline std::vector<RelevantEntry> relevant_tables(const QStore& store,
                                                  const std::vector<InteractionEvent>& events) {
    std::vector<RelevantEntry> out;
    out.reserve(events.size());
    for (const auto& ev : events) {
        if (ev.agent_type != store.agent_type())
            throw std::invalid_argument("relevant_tables: event pair must lead with the agent type");
        out.push_back({ev.other_type, ev.before});
    }
    return out;
}

/// Same keys straight from the current frame, for action selection before
/// the step happens.
inline std::vector<RelevantEntry> relevant_tables(const QStore& store,
                                                  const std::vector<Relation>& relations) {
    std::vector<RelevantEntry> out;
    out.reserve(relations.size());
    for (const auto& rel : relations) {
        if (rel.other_type == store.agent_type())
            throw std::invalid_argument("relevant_tables: the agent does not pair with itself");
        out.push_back({rel.other_type, rel.offset});
    }
    return out;
}

/// Greedy over the summed Q values of all relevant tables, ties uniform.
/// With probability epsilon the result is replaced by a uniformly random
/// *different* action, so the greedy pick keeps probability exactly 1-eps.
/// An empty view falls back to a uniform random action.
inline Action select_action(const QStore& store, const std::vector<RelevantEntry>& relevant,
                            double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("select_action: epsilon must lie in [0,1]");
    if (relevant.empty()) return static_cast<Action>(rng.uniform_index(kNumActions));

    std::array<double, kNumActions> sum{};
    for (const auto& entry : relevant)
        for (int a = 0; a < kNumActions; ++a)
            sum[static_cast<std::size_t>(a)] +=
                store.q(entry.other_type, entry.state, static_cast<Action>(a));

    double best = *std::max_element(sum.begin(), sum.end());
    std::array<int, kNumActions> ties{};
    std::size_t n_ties = 0;
    for (int a = 0; a < kNumActions; ++a)
        if (sum[static_cast<std::size_t>(a)] == best) ties[n_ties++] = a;
    int greedy = ties[rng.uniform_index(n_ties)];

    if (epsilon > 0.0 && rng.bernoulli(epsilon)) {
        auto k = static_cast<int>(rng.uniform_index(kNumActions - 1));
        return static_cast<Action>(k >= greedy ? k + 1 : k);
    }
    return static_cast<Action>(greedy);
}

} // namespace dsrl
