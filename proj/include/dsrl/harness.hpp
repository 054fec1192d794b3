#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsrl/autoencoder.hpp"
#include "dsrl/config.hpp"
#include "dsrl/dqn.hpp"
#include "dsrl/env.hpp"
#include "dsrl/metrics.hpp"
#include "dsrl/qlearning.hpp"
#include "dsrl/representation.hpp"
#include "dsrl/rng.hpp"
#include "dsrl/symbols.hpp"
#include "dsrl/tracker.hpp"

namespace dsrl {

// Tags for fanning the master seed into independent streams. Per-agent
// streams derive from the master, everything else from the agent stream;
// epoch-indexed tags live in disjoint ranges.
namespace seedtag {
inline constexpr std::uint64_t kPretrain = 0x17;
inline constexpr std::uint64_t kRegistrySeed = 0x18;
inline constexpr std::uint64_t kAgent = 0xA000;
inline constexpr std::uint64_t kPolicy = 1;
inline constexpr std::uint64_t kCalibGame = 2;
inline constexpr std::uint64_t kCalibPolicy = 3;
inline constexpr std::uint64_t kNetInit = 4;
inline constexpr std::uint64_t kReplay = 5;
inline constexpr std::uint64_t kTrainGame = 0x100000;   // + epoch
inline constexpr std::uint64_t kEvalGame = 0x200000;    // + epoch*32 + game
inline constexpr std::uint64_t kEvalPolicy = 0x400000;  // + epoch*32 + game
inline constexpr int kEvalStride = 32;
} // namespace seedtag

inline GameConfig game_config(const ExperimentConfig& cfg, int episode_steps) {
    GameConfig gc;
    gc.grid_w = cfg.grid_w;
    gc.grid_h = cfg.grid_h;
    gc.episode_steps = episode_steps;
    gc.random_objects = cfg.random_objects;
    return gc;
}

inline MatchConfig match_config(const ExperimentConfig& cfg) {
    MatchConfig mc;
    mc.w1 = cfg.track_w1;
    mc.w2 = cfg.track_w2;
    mc.w3 = cfg.track_w3;
    mc.d_max = cfg.track_d_max;
    mc.l_min = cfg.track_l_min;
    return mc;
}

/// The perception stack shared by every symbolic agent of a run.
struct PretrainResult {
    Autoencoder<float> model;
    PerceptionCalibration<float> cal;
    TypeRegistry<float> registry;
    std::vector<float> curve;
    float holdout_mse = 0;
    float intra_max = 0; // worst same-glyph spectrum spread, ground-truth scenes
    float inter_min = 0; // closest cross-glyph spectrum distance
};

namespace detail {

/// Spectrum spread across 100 ground-truth scenes: how far apart equal
/// glyphs land and how close different glyphs come.
template <typename T>
void measure_separability(Autoencoder<T>& model, const PerceptionCalibration<T>& cal,
                          const ExperimentConfig& cfg, Rng& rng, float& intra_max,
                          float& inter_min) {
    std::vector<std::vector<std::vector<T>>> by_glyph(3);
    for (int scene = 0; scene < 100; ++scene) {
        int count = 1 + static_cast<int>(rng.uniform_index(20));
        std::vector<int> cells(static_cast<std::size_t>(cfg.grid_w) * cfg.grid_h);
        for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
        std::vector<std::pair<CellPos, Glyph>> objs;
        for (int o = 0; o < count; ++o) {
            std::size_t pick = o + rng.uniform_index(cells.size() - static_cast<std::size_t>(o));
            std::swap(cells[static_cast<std::size_t>(o)], cells[pick]);
            int cell = cells[static_cast<std::size_t>(o)];
            objs.push_back({{cell % cfg.grid_w, cell / cfg.grid_w},
                            static_cast<Glyph>(rng.uniform_index(3))});
        }
        auto dets = detect(model.encode(render_scene(cfg.grid_w, cfg.grid_h, objs)),
                           cal.theta_sal, cal.rest);
        for (const auto& d : dets)
            for (const auto& [pos, glyph] : objs)
                if (pos == d.cell)
                    by_glyph[static_cast<std::size_t>(glyph)].push_back(d.spectrum);
    }
    intra_max = 0;
    inter_min = -1;
    for (std::size_t g = 0; g < 3; ++g)
        for (std::size_t i = 0; i < by_glyph[g].size(); ++i)
            for (std::size_t j = i + 1; j < by_glyph[g].size(); ++j)
                intra_max = std::max(intra_max,
                                     static_cast<float>(spectrum_ssd(by_glyph[g][i], by_glyph[g][j])));
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b)
            for (const auto& sa : by_glyph[a])
                for (const auto& sb : by_glyph[b]) {
                    float d = static_cast<float>(spectrum_ssd(sa, sb));
                    if (inter_min < 0 || d < inter_min) inter_min = d;
                }
}

} // namespace detail

/// Trains the autoencoder, calibrates thresholds, seeds the type registry
/// from random frames, and verifies the glyph spectra are separable enough
/// to type on. One result serves all agents and variants.
inline PretrainResult pretrain_autoencoder(const ExperimentConfig& cfg) {
    cfg.validate();
    PretrainResult pre;
    Rng rng(derive_seed(cfg.seed, seedtag::kPretrain));
    auto frames = generate_training_set(cfg.ae_frames, rng);
    auto held = static_cast<std::size_t>(std::llround(cfg.ae_holdout * frames.size()));
    if (held < 1 || held >= frames.size())
        throw std::invalid_argument("pretrain_autoencoder: holdout fraction leaves no data");
    std::vector<Frame> train(frames.begin(), frames.end() - static_cast<long>(held));
    std::vector<Frame> holdout(frames.end() - static_cast<long>(held), frames.end());

    pre.model = Autoencoder<float>(cfg.ae_features, cfg.grid_h * kCellPx, cfg.grid_w * kCellPx, rng);
    pre.curve = pre.model.train(train, cfg.ae_epochs, static_cast<float>(cfg.ae_lr),
                                cfg.ae_batch, rng);
    pre.holdout_mse = pre.model.mean_mse(holdout);

    pre.cal = calibrate_perception(pre.model);
    detail::measure_separability(pre.model, pre.cal, cfg, rng, pre.intra_max, pre.inter_min);
    if (!(pre.inter_min > 0) ||
        pre.inter_min < static_cast<float>(cfg.separability_min) * pre.intra_max) {
        std::ostringstream msg;
        msg << "pretrain_autoencoder: glyph spectra too entangled to type on "
            << "(closest cross-glyph distance " << pre.inter_min
            << ", widest same-glyph spread " << pre.intra_max << ", required ratio "
            << cfg.separability_min << ")";
        throw std::runtime_error(msg.str());
    }

    // let the registry allocate its types on a stream of ordinary frames
    pre.registry = TypeRegistry<float>(pre.cal.theta_sal, pre.cal.theta_type);
    Rng reg_rng(derive_seed(cfg.seed, seedtag::kRegistrySeed));
    auto reg_frames = generate_training_set(100, reg_rng);
    for (const auto& f : reg_frames) symbolize(f, pre.model, pre.registry, pre.cal.rest);
    return pre;
}

/// Writes the perception stack into a directory so later runs can skip the
/// training step. Thresholds travel inside the registry file; the resting
/// levels are recomputed from the model on load.
inline void save_pretrain(const std::string& dir, const PretrainResult& pre) {
    std::filesystem::create_directories(dir);
    pre.model.save(dir + "/autoencoder.bin");
    pre.registry.save(dir + "/registry.txt");
    std::ofstream out(dir + "/pretrain.txt");
    if (!out) throw std::runtime_error("save_pretrain: cannot open " + dir + "/pretrain.txt");
    out.precision(9);
    out << "holdout_mse " << pre.holdout_mse << "\n";
    out << "intra_max " << pre.intra_max << "\n";
    out << "inter_min " << pre.inter_min << "\n";
    out << "curve " << pre.curve.size();
    for (float v : pre.curve) out << ' ' << v;
    out << "\n";
    if (!out) throw std::runtime_error("save_pretrain: write failed in " + dir);
}

inline PretrainResult load_pretrain(const std::string& dir, const ExperimentConfig& cfg) {
    cfg.validate();
    PretrainResult pre;
    Rng unused(0);
    pre.model = Autoencoder<float>(cfg.ae_features, cfg.grid_h * kCellPx, cfg.grid_w * kCellPx,
                                   unused);
    pre.model.load(dir + "/autoencoder.bin");
    pre.registry = TypeRegistry<float>::load(dir + "/registry.txt");
    pre.cal = calibrate_perception(pre.model);

    std::ifstream in(dir + "/pretrain.txt");
    if (!in) throw std::runtime_error("load_pretrain: cannot open " + dir + "/pretrain.txt");
    std::string key;
    std::size_t n = 0;
    if (!(in >> key >> pre.holdout_mse) || key != "holdout_mse" ||
        !(in >> key >> pre.intra_max) || key != "intra_max" ||
        !(in >> key >> pre.inter_min) || key != "inter_min" || !(in >> key >> n) || key != "curve")
        throw std::runtime_error("load_pretrain: malformed " + dir + "/pretrain.txt");
    pre.curve.resize(n);
    for (auto& v : pre.curve)
        if (!(in >> v)) throw std::runtime_error("load_pretrain: truncated loss curve");
    return pre;
}

/// A symbolic agent's learned state: everything needed to play greedily.
struct SymbolicAgent {
    AgentIdentity identity;
    TypeRegistry<float> registry;
    TransitionMatrix trans{1};
    std::optional<QStore> q;
};

struct RunOutcome {
    std::vector<MetricsRow> rows;
    SymbolicAgent agent;               // symbolic runs only
    std::optional<QNetwork<float>> net; // baseline runs only
};

namespace detail {

/// Random-policy episode watched through the full perception stack; the
/// mover it singles out is the agent type for the rest of the run.
inline AgentIdentity calibrate_identity(const ExperimentConfig& cfg, PretrainResult& pre,
                                        SymbolicAgent& agent, std::uint64_t agent_seed) {
    GridGame game(cfg.variant, derive_seed(agent_seed, seedtag::kCalibGame),
                  game_config(cfg, cfg.calibration_steps));
    Tracker tracker(match_config(cfg), &agent.trans, true);
    Rng policy(derive_seed(agent_seed, seedtag::kCalibPolicy));

    std::vector<std::vector<TrackedObject>> snaps;
    tracker.step(symbolize(game.render(), pre.model, agent.registry, pre.cal.rest));
    snaps.push_back(tracker.objects());
    while (!game.terminal()) {
        auto out = game.step(static_cast<Action>(policy.uniform_index(kNumActions)));
        tracker.step(symbolize(out.frame, pre.model, agent.registry, pre.cal.rest));
        snaps.push_back(tracker.objects());
    }
    return identify_agent(snaps);
}

inline MetricsRow evaluate_symbolic(const ExperimentConfig& cfg, PretrainResult& pre,
                                    const SymbolicAgent& agent, Variant eval_variant,
                                    int epoch, int agent_id, std::uint64_t agent_seed) {
    long positives = 0, negatives = 0;
    double score_sum = 0;
    for (int g = 0; g < cfg.test_games; ++g) {
        std::uint64_t point = static_cast<std::uint64_t>(epoch) * seedtag::kEvalStride +
                              static_cast<std::uint64_t>(g);
        GridGame game(eval_variant, derive_seed(agent_seed, seedtag::kEvalGame + point),
                      game_config(cfg, cfg.test_steps));
        Rng policy(derive_seed(agent_seed, seedtag::kEvalPolicy + point));
        // frozen everything: registry read-only, matrix not learning
        TransitionMatrix* trans = const_cast<TransitionMatrix*>(&agent.trans);
        Tracker tracker(match_config(cfg), trans, false);
        tracker.step(symbolize_frozen(game.render(), pre.model, agent.registry, pre.cal.rest));
        while (!game.terminal()) {
            auto relations = current_relations(tracker.objects(), agent.identity, cfg.radius);
            Action a = select_action(*agent.q, relevant_tables(*agent.q, relations), 0.0, policy);
            auto out = game.step(a);
            tracker.step(symbolize_frozen(out.frame, pre.model, agent.registry, pre.cal.rest));
        }
        score_sum += game.score();
        positives += game.positives_collected();
        negatives += game.negatives_collected();
    }
    MetricsRow row;
    row.epoch = epoch;
    row.agent_id = agent_id;
    row.avg_score = score_sum / cfg.test_games;
    row.encountered = positives + negatives;
    if (row.encountered > 0) row.pct_positive = percent_positive(positives, negatives);
    return row;
}

inline void train_symbolic_epoch(const ExperimentConfig& cfg, PretrainResult& pre,
                                 SymbolicAgent& agent, int epoch, std::uint64_t agent_seed,
                                 Rng& policy) {
    GridGame game(cfg.variant,
                  derive_seed(agent_seed, seedtag::kTrainGame + static_cast<std::uint64_t>(epoch)),
                  game_config(cfg, cfg.steps_per_epoch));
    Tracker tracker(match_config(cfg), &agent.trans, true);
    tracker.step(symbolize(game.render(), pre.model, agent.registry, pre.cal.rest));
    std::vector<TrackedObject> prev = tracker.objects();
    int step = 0;
    while (!game.terminal()) {
        auto relations = current_relations(tracker.objects(), agent.identity, cfg.radius);
        Action a = select_action(*agent.q, relevant_tables(*agent.q, relations), cfg.q_epsilon,
                                 policy);
        auto out = game.step(a);
        tracker.step(symbolize(out.frame, pre.model, agent.registry, pre.cal.rest));
        auto events = extract_interactions(prev, tracker.objects(), agent.identity, cfg.radius,
                                           step);
        // one shared reward signs every table touched this step
        for (const auto& ev : events) agent.q->update(ev, a, out.reward);
        prev = tracker.objects();
        ++step;
    }
}

inline MetricsRow evaluate_random(const ExperimentConfig& cfg, Variant eval_variant, int epoch,
                                  int agent_id, std::uint64_t agent_seed) {
    long positives = 0, negatives = 0;
    double score_sum = 0;
    for (int g = 0; g < cfg.test_games; ++g) {
        std::uint64_t point = static_cast<std::uint64_t>(epoch) * seedtag::kEvalStride +
                              static_cast<std::uint64_t>(g);
        GridGame game(eval_variant, derive_seed(agent_seed, seedtag::kEvalGame + point),
                      game_config(cfg, cfg.test_steps));
        Rng policy(derive_seed(agent_seed, seedtag::kEvalPolicy + point));
        while (!game.terminal()) game.step(static_cast<Action>(policy.uniform_index(kNumActions)));
        score_sum += game.score();
        positives += game.positives_collected();
        negatives += game.negatives_collected();
    }
    MetricsRow row;
    row.epoch = epoch;
    row.agent_id = agent_id;
    row.avg_score = score_sum / cfg.test_games;
    row.encountered = positives + negatives;
    if (row.encountered > 0) row.pct_positive = percent_positive(positives, negatives);
    return row;
}

inline MetricsRow evaluate_dqn(const ExperimentConfig& cfg, QNetwork<float>& net,
                               Variant eval_variant, int epoch, int agent_id,
                               std::uint64_t agent_seed) {
    long positives = 0, negatives = 0;
    double score_sum = 0;
    for (int g = 0; g < cfg.test_games; ++g) {
        std::uint64_t point = static_cast<std::uint64_t>(epoch) * seedtag::kEvalStride +
                              static_cast<std::uint64_t>(g);
        GridGame game(eval_variant, derive_seed(agent_seed, seedtag::kEvalGame + point),
                      game_config(cfg, cfg.test_steps));
        Rng policy(derive_seed(agent_seed, seedtag::kEvalPolicy + point));
        Frame frame = game.render();
        while (!game.terminal()) {
            auto out = game.step(act(net, frame, 0.0, policy));
            frame = out.frame;
        }
        score_sum += game.score();
        positives += game.positives_collected();
        negatives += game.negatives_collected();
    }
    MetricsRow row;
    row.epoch = epoch;
    row.agent_id = agent_id;
    row.avg_score = score_sum / cfg.test_games;
    row.encountered = positives + negatives;
    if (row.encountered > 0) row.pct_positive = percent_positive(positives, negatives);
    return row;
}

} // namespace detail

/// Calibration, then the train/test loop: each epoch is a fresh game played
/// epsilon-greedily with Q updates; every test_every epochs (and at epoch 0)
/// the frozen agent plays test_games greedy games on eval_variant.
inline RunOutcome train_symbolic_agent(const ExperimentConfig& cfg, PretrainResult& pre,
                                       int agent_id, Variant eval_variant) {
    cfg.validate();
    std::uint64_t agent_seed =
        derive_seed(cfg.seed, seedtag::kAgent + static_cast<std::uint64_t>(agent_id));
    RunOutcome run;
    run.agent.registry = pre.registry;
    run.agent.identity = detail::calibrate_identity(cfg, pre, run.agent, agent_seed);
    run.agent.q.emplace(run.agent.identity.type, cfg.radius, cfg.q_alpha, cfg.q_gamma, cfg.q_form);

    Rng policy(derive_seed(agent_seed, seedtag::kPolicy));
    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
        if (epoch % cfg.test_every == 0)
            run.rows.push_back(detail::evaluate_symbolic(cfg, pre, run.agent, eval_variant, epoch,
                                                         agent_id, agent_seed));
        if (epoch == cfg.epochs) break;
        detail::train_symbolic_epoch(cfg, pre, run.agent, epoch, agent_seed, policy);
    }
    return run;
}

/// Uniform-action control under the identical evaluation protocol.
inline RunOutcome run_random_agent(const ExperimentConfig& cfg, int agent_id,
                                   Variant eval_variant) {
    cfg.validate();
    std::uint64_t agent_seed =
        derive_seed(cfg.seed, seedtag::kAgent + static_cast<std::uint64_t>(agent_id));
    RunOutcome run;
    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
        if (epoch % cfg.test_every == 0)
            run.rows.push_back(
                detail::evaluate_random(cfg, eval_variant, epoch, agent_id, agent_seed));
    }
    return run;
}

/// Raw-pixel baseline under the same protocol: replay buffer, target
/// network, annealed exploration.
inline RunOutcome train_dqn_agent(const ExperimentConfig& cfg, int agent_id,
                                  Variant eval_variant) {
    cfg.validate();
    std::uint64_t agent_seed =
        derive_seed(cfg.seed, seedtag::kAgent + static_cast<std::uint64_t>(agent_id));
    Rng net_rng(derive_seed(agent_seed, seedtag::kNetInit));
    RunOutcome run;
    run.net.emplace(cfg.grid_h * kCellPx, cfg.grid_w * kCellPx, cfg.dqn_hidden, net_rng);
    QNetwork<float>& net = *run.net;

    ReplayBuffer buffer(static_cast<std::size_t>(cfg.dqn_capacity));
    Rng policy(derive_seed(agent_seed, seedtag::kPolicy));
    Rng replay(derive_seed(agent_seed, seedtag::kReplay));
    long global_step = 0;

    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
        if (epoch % cfg.test_every == 0)
            run.rows.push_back(
                detail::evaluate_dqn(cfg, net, eval_variant, epoch, agent_id, agent_seed));
        if (epoch == cfg.epochs) break;

        double eps = dqn_epsilon(epoch, cfg.dqn_anneal, cfg.dqn_eps_floor);
        GridGame game(cfg.variant,
                      derive_seed(agent_seed,
                                  seedtag::kTrainGame + static_cast<std::uint64_t>(epoch)),
                      game_config(cfg, cfg.steps_per_epoch));
        Frame frame = game.render();
        while (!game.terminal()) {
            Action a = act(net, frame, eps, policy);
            auto out = game.step(a);
            buffer.push({frame, a, out.reward, out.frame, out.terminal});
            frame = out.frame;
            ++global_step;
            if (buffer.size() >= static_cast<std::size_t>(cfg.dqn_batch) &&
                global_step % cfg.dqn_train_every == 0) {
                float loss = train_step<float>(net, buffer, cfg.dqn_batch,
                                               static_cast<float>(cfg.dqn_gamma),
                                               static_cast<float>(cfg.dqn_lr), replay);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_dqn_agent: loss diverged at epoch " +
                                             std::to_string(epoch));
            }
            if (global_step % cfg.dqn_sync == 0) net.sync_target();
        }
    }
    return run;
}

/// One frozen test block for an already-built agent (reloaded artifacts or a
/// finished run). Seeded like agent `agent_id`'s regular evaluation at `epoch`.
inline MetricsRow evaluate_agent(const ExperimentConfig& cfg, PretrainResult& pre,
                                 const SymbolicAgent& agent, Variant eval_variant, int epoch,
                                 int agent_id = 0) {
    if (!agent.q) throw std::invalid_argument("evaluate_agent: agent has no Q tables");
    return detail::evaluate_symbolic(cfg, pre, agent, eval_variant, epoch, agent_id,
                                     derive_seed(cfg.seed, seedtag::kAgent + agent_id));
}

/// Runs cfg.agents agents of cfg.agent kind and concatenates their metrics.
/// eval_variant defaults to the training variant; passing a different one is
/// the transfer protocol (train on one variant, test frozen on the other).
inline std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg, PretrainResult* pre,
                                              std::optional<Variant> eval_override = {}) {
    cfg.validate();
    Variant eval_variant = eval_override.value_or(cfg.variant);
    if (cfg.agent == AgentKind::Symbolic && pre == nullptr)
        throw std::invalid_argument("run_experiment: symbolic agents need a pretrained stack");
    std::vector<RunOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(cfg.agents));
    for (int id = 0; id < cfg.agents; ++id) {
        switch (cfg.agent) {
            case AgentKind::Symbolic:
                outcomes.push_back(train_symbolic_agent(cfg, *pre, id, eval_variant));
                break;
            case AgentKind::Random:
                outcomes.push_back(run_random_agent(cfg, id, eval_variant));
                break;
            case AgentKind::Dqn:
                outcomes.push_back(train_dqn_agent(cfg, id, eval_variant));
                break;
        }
    }
    return outcomes;
}

/// Mean of one metrics column across agents at a given epoch. Rows missing
/// the percentage (nothing encountered) are skipped for pct means.
inline double mean_pct_positive(const std::vector<RunOutcome>& outcomes, int epoch) {
    double sum = 0;
    int n = 0;
    for (const auto& run : outcomes)
        for (const auto& row : run.rows)
            if (row.epoch == epoch && row.pct_positive) {
                sum += *row.pct_positive;
                ++n;
            }
    if (n == 0) throw std::invalid_argument("mean_pct_positive: no rows at that epoch");
    return sum / n;
}

inline double mean_avg_score(const std::vector<RunOutcome>& outcomes, int epoch) {
    double sum = 0;
    int n = 0;
    for (const auto& run : outcomes)
        for (const auto& row : run.rows)
            if (row.epoch == epoch) {
                sum += row.avg_score;
                ++n;
            }
    if (n == 0) throw std::invalid_argument("mean_avg_score: no rows at that epoch");
    return sum / n;
}

} // namespace dsrl
