#pragma once

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dsrl/env.hpp"
#include "dsrl/qlearning.hpp"

namespace dsrl {

enum class AgentKind { Symbolic, Dqn, Random };

inline const char* agent_kind_name(AgentKind k) {
    switch (k) {
        case AgentKind::Symbolic: return "symbolic";
        case AgentKind::Dqn: return "dqn";
        case AgentKind::Random: return "random";
    }
    return "?";
}

inline std::optional<AgentKind> parse_agent_kind(const std::string& s) {
    if (s == "symbolic") return AgentKind::Symbolic;
    if (s == "dqn") return AgentKind::Dqn;
    if (s == "random") return AgentKind::Random;
    return std::nullopt;
}

/// Every tunable in one place; the defaults are the experiment protocol.
/// Serialized as `key value` lines so a run's exact settings can be read,
/// diffed, and replayed.
struct ExperimentConfig {
    // experiment protocol
    Variant variant = Variant::RandomMixed;
    AgentKind agent = AgentKind::Symbolic;
    int agents = 20;
    int epochs = 1000;
    int steps_per_epoch = 100;
    int test_every = 10;
    int test_games = 10;
    int test_steps = 200;
    std::uint64_t seed = 1;

    // game board
    int grid_w = 10;
    int grid_h = 10;
    int random_objects = 12;

    // autoencoder pretraining
    int ae_features = 8;
    int ae_frames = 5000;
    int ae_epochs = 30;
    int ae_batch = 16;
    double ae_lr = 0.1;
    double ae_holdout = 0.1;
    double ae_mse_bar = 0.01;
    double separability_min = 5.0;

    // tracker matching
    double track_w1 = 0.3;
    double track_w2 = 0.5;
    double track_w3 = 0.2;
    int track_d_max = 4;
    double track_l_min = 0.3;

    // interaction representation
    int radius = 3;
    int calibration_steps = 100;

    // tabular learner
    double q_alpha = 0.1;
    double q_gamma = 0.9;
    double q_epsilon = 0.1;
    QUpdateForm q_form = QUpdateForm::Textbook;

    // baseline network
    int dqn_hidden = 64;
    int dqn_capacity = 10000;
    int dqn_batch = 32;
    int dqn_sync = 250;
    int dqn_anneal = 200;
    double dqn_eps_floor = 0.1;
    double dqn_lr = 0.01;
    double dqn_gamma = 0.9;
    int dqn_train_every = 1;

    void validate() const {
        auto positive = [](long v, const char* what) {
            if (v < 1) throw std::invalid_argument(std::string("ExperimentConfig: ") + what +
                                                   " must be positive");
        };
        positive(agents, "agents");
        if (epochs < 0) throw std::invalid_argument("ExperimentConfig: epochs must be >= 0");
        positive(steps_per_epoch, "steps_per_epoch");
        positive(test_every, "test_every");
        positive(test_games, "test_games");
        positive(test_steps, "test_steps");
        positive(grid_w, "grid_w");
        positive(grid_h, "grid_h");
        positive(random_objects, "random_objects");
        positive(ae_features, "ae_features");
        positive(ae_frames, "ae_frames");
        positive(ae_epochs, "ae_epochs");
        positive(ae_batch, "ae_batch");
        positive(radius, "radius");
        if (calibration_steps < 10)
            throw std::invalid_argument(
                "ExperimentConfig: calibration_steps must allow at least 10 frames");
        positive(dqn_hidden, "dqn_hidden");
        positive(dqn_capacity, "dqn_capacity");
        positive(dqn_batch, "dqn_batch");
        positive(dqn_sync, "dqn_sync");
        positive(dqn_anneal, "dqn_anneal");
        positive(dqn_train_every, "dqn_train_every");
        if (!(ae_lr > 0) || !(dqn_lr > 0))
            throw std::invalid_argument("ExperimentConfig: learning rates must be positive");
        if (!(ae_holdout > 0 && ae_holdout < 1))
            throw std::invalid_argument("ExperimentConfig: ae_holdout must lie in (0,1)");
        if (!(ae_mse_bar > 0))
            throw std::invalid_argument("ExperimentConfig: ae_mse_bar must be positive");
        if (!(separability_min >= 1))
            throw std::invalid_argument("ExperimentConfig: separability_min must be >= 1");
        if (!(q_alpha > 0 && q_alpha <= 1))
            throw std::invalid_argument("ExperimentConfig: q_alpha must lie in (0,1]");
        if (!(q_gamma >= 0 && q_gamma < 1) || !(dqn_gamma >= 0 && dqn_gamma < 1))
            throw std::invalid_argument("ExperimentConfig: discounts must lie in [0,1)");
        if (!(q_epsilon >= 0 && q_epsilon <= 1) || !(dqn_eps_floor >= 0 && dqn_eps_floor <= 1))
            throw std::invalid_argument("ExperimentConfig: exploration rates must lie in [0,1]");
        if (!(track_w1 >= 0 && track_w2 >= 0 && track_w3 >= 0) || track_d_max < 1 ||
            !(track_l_min >= 0))
            throw std::invalid_argument("ExperimentConfig: bad tracker weights");
    }

    void save(std::ostream& out) const {
        out << std::setprecision(17);
        out << "variant " << variant_name(variant) << "\n";
        out << "agent " << agent_kind_name(agent) << "\n";
        out << "agents " << agents << "\n";
        out << "epochs " << epochs << "\n";
        out << "steps_per_epoch " << steps_per_epoch << "\n";
        out << "test_every " << test_every << "\n";
        out << "test_games " << test_games << "\n";
        out << "test_steps " << test_steps << "\n";
        out << "seed " << seed << "\n";
        out << "grid_w " << grid_w << "\n";
        out << "grid_h " << grid_h << "\n";
        out << "random_objects " << random_objects << "\n";
        out << "ae_features " << ae_features << "\n";
        out << "ae_frames " << ae_frames << "\n";
        out << "ae_epochs " << ae_epochs << "\n";
        out << "ae_batch " << ae_batch << "\n";
        out << "ae_lr " << ae_lr << "\n";
        out << "ae_holdout " << ae_holdout << "\n";
        out << "ae_mse_bar " << ae_mse_bar << "\n";
        out << "separability_min " << separability_min << "\n";
        out << "track_w1 " << track_w1 << "\n";
        out << "track_w2 " << track_w2 << "\n";
        out << "track_w3 " << track_w3 << "\n";
        out << "track_d_max " << track_d_max << "\n";
        out << "track_l_min " << track_l_min << "\n";
        out << "radius " << radius << "\n";
        out << "calibration_steps " << calibration_steps << "\n";
        out << "q_alpha " << q_alpha << "\n";
        out << "q_gamma " << q_gamma << "\n";
        out << "q_epsilon " << q_epsilon << "\n";
        out << "q_form " << update_form_name(q_form) << "\n";
        out << "dqn_hidden " << dqn_hidden << "\n";
        out << "dqn_capacity " << dqn_capacity << "\n";
        out << "dqn_batch " << dqn_batch << "\n";
        out << "dqn_sync " << dqn_sync << "\n";
        out << "dqn_anneal " << dqn_anneal << "\n";
        out << "dqn_eps_floor " << dqn_eps_floor << "\n";
        out << "dqn_lr " << dqn_lr << "\n";
        out << "dqn_gamma " << dqn_gamma << "\n";
        out << "dqn_train_every " << dqn_train_every << "\n";
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("ExperimentConfig::save: cannot open " + path);
        save(out);
    }

    /// Reads `key value` lines over the defaults; `#` starts a comment.
    /// Unknown keys are an error so typos don't silently fall back.
    static ExperimentConfig load(std::istream& in) {
        ExperimentConfig cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            std::string key;
            if (!(ls >> key)) continue;
            std::string value;
            if (!(ls >> value))
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": missing value for '" + key + "'");
            cfg.apply(key, value, line_no);
        }
        cfg.validate();
        return cfg;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("ExperimentConfig::load: cannot open " + path);
        return load(in);
    }

private:
    void apply(const std::string& key, const std::string& value, int line_no) {
        auto bad = [&](const std::string& why) {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": " + why);
        };
        auto as_int = [&] {
            try {
                std::size_t used = 0;
                int v = std::stoi(value, &used);
                if (used == value.size()) return v;
            } catch (const std::exception&) {
            }
            bad("'" + value + "' is not an integer");
            return 0;
        };
        auto as_real = [&] {
            try {
                std::size_t used = 0;
                double v = std::stod(value, &used);
                if (used == value.size()) return v;
            } catch (const std::exception&) {
            }
            bad("'" + value + "' is not a number");
            return 0.0;
        };
        auto as_seed = [&] {
            try {
                std::size_t used = 0;
                auto v = std::stoull(value, &used);
                if (used == value.size()) return static_cast<std::uint64_t>(v);
            } catch (const std::exception&) {
            }
            bad("'" + value + "' is not a seed");
            return std::uint64_t{0};
        };
        if (key == "variant") {
            auto v = parse_variant(value);
            if (!v) bad("unknown variant '" + value + "'");
            variant = *v;
        } else if (key == "agent") {
            auto k = parse_agent_kind(value);
            if (!k) bad("unknown agent kind '" + value + "'");
            agent = *k;
        } else if (key == "agents") agents = as_int();
        else if (key == "epochs") epochs = as_int();
        else if (key == "steps_per_epoch") steps_per_epoch = as_int();
        else if (key == "test_every") test_every = as_int();
        else if (key == "test_games") test_games = as_int();
        else if (key == "test_steps") test_steps = as_int();
        else if (key == "seed") seed = as_seed();
        else if (key == "grid_w") grid_w = as_int();
        else if (key == "grid_h") grid_h = as_int();
        else if (key == "random_objects") random_objects = as_int();
        else if (key == "ae_features") ae_features = as_int();
        else if (key == "ae_frames") ae_frames = as_int();
        else if (key == "ae_epochs") ae_epochs = as_int();
        else if (key == "ae_batch") ae_batch = as_int();
        else if (key == "ae_lr") ae_lr = as_real();
        else if (key == "ae_holdout") ae_holdout = as_real();
        else if (key == "ae_mse_bar") ae_mse_bar = as_real();
        else if (key == "separability_min") separability_min = as_real();
        else if (key == "track_w1") track_w1 = as_real();
        else if (key == "track_w2") track_w2 = as_real();
        else if (key == "track_w3") track_w3 = as_real();
        else if (key == "track_d_max") track_d_max = as_int();
        else if (key == "track_l_min") track_l_min = as_real();
        else if (key == "radius") radius = as_int();
        else if (key == "calibration_steps") calibration_steps = as_int();
        else if (key == "q_alpha") q_alpha = as_real();
        else if (key == "q_gamma") q_gamma = as_real();
        else if (key == "q_epsilon") q_epsilon = as_real();
        else if (key == "q_form") q_form = parse_update_form(value);
        else if (key == "dqn_hidden") dqn_hidden = as_int();
        else if (key == "dqn_capacity") dqn_capacity = as_int();
        else if (key == "dqn_batch") dqn_batch = as_int();
        else if (key == "dqn_sync") dqn_sync = as_int();
        else if (key == "dqn_anneal") dqn_anneal = as_int();
        else if (key == "dqn_eps_floor") dqn_eps_floor = as_real();
        else if (key == "dqn_lr") dqn_lr = as_real();
        else if (key == "dqn_gamma") dqn_gamma = as_real();
        else if (key == "dqn_train_every") dqn_train_every = as_int();
        else bad("unknown key '" + key + "'");
    }
};

} // namespace dsrl
