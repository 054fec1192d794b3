#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dsrl/tracker.hpp"

namespace dsrl {

/// Relative cell offset of one object from another, bounded by the
/// interaction radius in Chebyshev distance.
struct InteractionState {
    int dx = 0;
    int dy = 0;
    friend bool operator==(const InteractionState&, const InteractionState&) = default;
};

inline int chebyshev(CellPos a, CellPos b) {
    return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

/// The type the agent's actions move directly.
struct AgentIdentity {
    int type = 0;
};

/// One nearby object's frame-to-frame change, centered on the agent.
/// `after` is only meaningful when has_after is true; an object that vanished
/// at the agent's destination cell is flagged as contact, any other vanish is
/// a plain disappearance.
struct InteractionEvent {
    int step = 0;
    int agent_id = 0;
    int other_id = 0;
    int agent_type = 0;
    int other_type = 0;
    InteractionState before;
    bool has_after = false;
    InteractionState after;
    bool contact = false;
};

/// A nearby object as seen from the agent right now.
struct Relation {
    int other_id = 0;
    int other_type = 0;
    InteractionState offset;
};

namespace detail {
inline const TrackedObject* find_unique_of_type(const std::vector<TrackedObject>& objs,
                                                int type) {
    const TrackedObject* found = nullptr;
    for (const auto& o : objs) {
        if (o.type != type) continue;
        if (found) return nullptr; // not unique
        found = &o;
    }
    return found;
}
} // namespace detail

/// All non-agent objects within Chebyshev radius R of the agent.
inline std::vector<Relation> current_relations(const std::vector<TrackedObject>& objects,
                                               const AgentIdentity& agent, int radius) {
    if (radius <= 0) throw std::invalid_argument("current_relations: radius must be positive");
    const TrackedObject* self = detail::find_unique_of_type(objects, agent.type);
    if (self == nullptr)
        throw std::logic_error("current_relations: agent instance missing or ambiguous");
    std::vector<Relation> rel;
    for (const auto& o : objects) {
        if (o.id == self->id) continue;
        if (chebyshev(o.cell, self->cell) > radius) continue;
        rel.push_back({o.id, o.type, {o.cell.x - self->cell.x, o.cell.y - self->cell.y}});
    }
    return rel;
}

/// Picks the agent's type from a random-action calibration episode: the type
/// with exactly one instance throughout that moved in the largest fraction of
/// frame pairs. Requires at least 10 frames, a winning fraction >= 0.5 and no
/// tie at the top.
inline AgentIdentity identify_agent(const std::vector<std::vector<TrackedObject>>& frames) {
    if (frames.size() < 10)
        throw std::invalid_argument("identify_agent: need at least 10 calibration frames");

    std::map<int, bool> unique_throughout;
    for (const auto& frame : frames) {
        std::map<int, int> count;
        for (const auto& o : frame) count[o.type] += 1;
        for (auto [type, n] : count) {
            auto it = unique_throughout.find(type);
            if (it == unique_throughout.end())
                unique_throughout[type] = (n == 1);
            else if (n != 1)
                it->second = false;
        }
    }

    int best_type = 0;
    double best_frac = -1;
    bool tie = false;
    for (auto [type, unique] : unique_throughout) {
        if (!unique) continue;
        int moved = 0, pairs = 0;
        for (std::size_t t = 1; t < frames.size(); ++t) {
            const TrackedObject* a = detail::find_unique_of_type(frames[t - 1], type);
            const TrackedObject* b = detail::find_unique_of_type(frames[t], type);
            if (!a || !b || a->id != b->id) continue; // lost track: not a motion sample
            ++pairs;
            if (!(a->cell == b->cell)) ++moved;
        }
        if (pairs == 0) continue;
        double frac = static_cast<double>(moved) / static_cast<double>(pairs);
        if (frac > best_frac) {
            best_frac = frac;
            best_type = type;
            tie = false;
        } else if (frac == best_frac) {
            tie = true;
        }
    }
    if (best_type == 0 || best_frac < 0.5)
        throw std::runtime_error("identify_agent: no type moves often enough to be the agent");
    if (tie) throw std::runtime_error("identify_agent: motion fractions tie at the top");
    return {best_type};
}

/// Events for every object that was within the interaction radius of the
/// agent in the previous frame: its offset then, and either its offset now or
/// the manner of its disappearance.
inline std::vector<InteractionEvent> extract_interactions(
    const std::vector<TrackedObject>& prev, const std::vector<TrackedObject>& cur,
    const AgentIdentity& agent, int radius, int step = 0) {
    const TrackedObject* agent_cur = detail::find_unique_of_type(cur, agent.type);
    if (agent_cur == nullptr)
        throw std::logic_error("extract_interactions: agent missing in current frame");

    auto relations = current_relations(prev, agent, radius);
    std::map<int, const TrackedObject*> cur_by_id;
    for (const auto& o : cur) cur_by_id[o.id] = &o;

    std::vector<InteractionEvent> events;
    for (const auto& rel : relations) {
        InteractionEvent ev;
        ev.step = step;
        ev.agent_id = agent_cur->id;
        ev.other_id = rel.other_id;
        ev.agent_type = agent.type;
        ev.other_type = rel.other_type;
        ev.before = rel.offset;
        auto it = cur_by_id.find(rel.other_id);
        if (it != cur_by_id.end()) {
            ev.has_after = true;
            ev.after = {it->second->cell.x - agent_cur->cell.x,
                        it->second->cell.y - agent_cur->cell.y};
        } else {
            // vanished; contact when it was last seen where the agent now is
            const TrackedObject* last = nullptr;
            for (const auto& o : prev)
                if (o.id == rel.other_id) last = &o;
            ev.contact = last != nullptr && last->cell == agent_cur->cell;
        }
        events.push_back(ev);
    }
    return events;
}

inline std::vector<Relation> current_relations(const std::vector<TrackedObject>& objects,
                                               int agent_type, int radius) {
    return current_relations(objects, AgentIdentity{agent_type}, radius);
}

/// Audit dump: one row per event with the step's reward.
inline void write_events_csv(std::ostream& out,
                             const std::vector<std::pair<InteractionEvent, int>>& rows) {
    out << "step,pair,dx_before,dy_before,dx_after,dy_after,contact,reward\n";
    for (const auto& [ev, reward] : rows) {
        out << ev.step << ',' << ev.agent_type << '-' << ev.other_type << ',' << ev.before.dx
            << ',' << ev.before.dy << ',';
        if (ev.has_after)
            out << ev.after.dx << ',' << ev.after.dy;
        else
            out << ',';
        out << ',' << (ev.contact ? 1 : 0) << ',' << reward << "\n";
    }
}

} // namespace dsrl
