#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsrl/harness.hpp"

namespace fs = std::filesystem;
using namespace dsrl;

namespace {

const std::map<std::string, Variant> kVariantNames = {
    {"grid-neg", Variant::GridNeg},
    {"grid-mixed", Variant::GridMixed},
    {"random-neg", Variant::RandomNeg},
    {"random-mixed", Variant::RandomMixed},
};

// Flags shared by every subcommand. Values only override the config file
// when actually given on the command line, hence the option handles.
struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    Variant variant = Variant::RandomMixed;
    int agents = 0;
    int epochs = 0;
    std::uint64_t seed = 0;
    CLI::Option* o_variant = nullptr;
    CLI::Option* o_agents = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_seed = nullptr;
};

void add_common(CLI::App& cmd, CommonArgs& a) {
    cmd.add_option("--config", a.config_path, "key-value config file")->check(CLI::ExistingFile);
    cmd.add_option("--out", a.out_dir, "output directory");
    a.o_variant = cmd.add_option("--variant", a.variant, "game variant")
                      ->transform(CLI::CheckedTransformer(kVariantNames, CLI::ignore_case));
    a.o_agents = cmd.add_option("--agents", a.agents, "independent agents")
                     ->check(CLI::PositiveNumber);
    a.o_epochs = cmd.add_option("--epochs", a.epochs, "training epochs")
                     ->check(CLI::NonNegativeNumber);
    a.o_seed = cmd.add_option("--seed", a.seed, "master seed");
}

ExperimentConfig resolve(const CommonArgs& a) {
    ExperimentConfig cfg;
    if (!a.config_path.empty()) cfg = ExperimentConfig::load(a.config_path);
    if (a.o_variant->count()) cfg.variant = a.variant;
    if (a.o_agents->count()) cfg.agents = a.agents;
    if (a.o_epochs->count()) cfg.epochs = a.epochs;
    if (a.o_seed->count()) cfg.seed = a.seed;
    cfg.validate();
    return cfg;
}

// Loads pretrained artifacts from dir, or builds and saves them there.
PretrainResult ensure_pretrained(const ExperimentConfig& cfg, const fs::path& dir) {
    if (fs::exists(dir / "autoencoder.bin")) {
        std::printf("loading pretrained stack from %s\n", dir.string().c_str());
        return load_pretrain(dir.string(), cfg);
    }
    std::printf("pretraining into %s (frames %d, epochs %d)\n", dir.string().c_str(),
                cfg.ae_frames, cfg.ae_epochs);
    PretrainResult pre = pretrain_autoencoder(cfg);
    save_pretrain(dir.string(), pre);
    return pre;
}

void print_pretrain_summary(const PretrainResult& pre) {
    std::printf("holdout mse %.6f, types %d, spectrum spread %.4f intra vs %.4f inter\n",
                static_cast<double>(pre.holdout_mse), pre.registry.num_types(),
                static_cast<double>(pre.intra_max), static_cast<double>(pre.inter_min));
}

std::vector<MetricsRow> gather_rows(const std::vector<RunOutcome>& outs) {
    std::vector<MetricsRow> rows;
    for (const auto& o : outs) rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    return rows;
}

void save_agents(const fs::path& out, const std::vector<RunOutcome>& outs) {
    for (std::size_t i = 0; i < outs.size(); ++i) {
        fs::path adir = out / ("agent_" + std::to_string(i));
        fs::create_directories(adir);
        if (outs[i].agent.q) {
            outs[i].agent.q->save((adir / "qstore.txt").string());
            outs[i].agent.trans.save((adir / "transitions.txt").string());
            outs[i].agent.registry.save((adir / "registry.txt").string());
        }
        if (outs[i].net) outs[i].net->save((adir / "network.bin").string());
    }
}

void report_run(const ExperimentConfig& cfg, const std::vector<RunOutcome>& outs) {
    std::printf("%-6s", "epoch");
    std::printf("  %10s  %12s\n", "mean score", "mean pct_pos");
    for (int e = 0; e <= cfg.epochs; e += cfg.test_every) {
        std::printf("%-6d  %+10.3f", e, mean_avg_score(outs, e));
        try {
            std::printf("  %12.2f\n", mean_pct_positive(outs, e));
        } catch (const std::invalid_argument&) {
            std::printf("  %12s\n", "-");
        }
        if (cfg.epochs == 0) break;
    }
}

// Train/transfer/baseline share this body; they differ in agent kind and
// where the evaluation games come from.
int run_and_persist(const ExperimentConfig& cfg, const fs::path& out, PretrainResult* pre,
                    std::optional<Variant> eval_override = {}) {
    fs::create_directories(out);
    cfg.save((out / "config.txt").string());
    auto outs = run_experiment(cfg, pre, eval_override);
    write_metrics_csv((out / "metrics.csv").string(), gather_rows(outs));
    save_agents(out, outs);
    report_run(cfg, outs);
    std::printf("wrote %s\n", (out / "metrics.csv").string().c_str());
    return 0;
}

SymbolicAgent load_agent(const fs::path& dir) {
    SymbolicAgent agent;
    agent.q = QStore::load((dir / "qstore.txt").string());
    agent.identity.type = agent.q->agent_type();
    agent.trans = TransitionMatrix::load((dir / "transitions.txt").string());
    agent.registry = TypeRegistry<float>::load((dir / "registry.txt").string());
    return agent;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pixel-to-symbol grid-game agents"};
    app.require_subcommand(1);

    CommonArgs pre_a, train_a, eval_a, transfer_a, base_a, render_a;

    auto* cmd_pre = app.add_subcommand("pretrain", "train the autoencoder and type registry");
    add_common(*cmd_pre, pre_a);

    auto* cmd_train = app.add_subcommand("train", "train agents and write metrics");
    add_common(*cmd_train, train_a);
    std::string train_pre_dir;
    cmd_train->add_option("--pretrained", train_pre_dir,
                          "pretrained artifact dir (default <out>/pretrain)");

    auto* cmd_eval = app.add_subcommand("eval", "run the frozen test block on a saved agent");
    add_common(*cmd_eval, eval_a);
    std::string eval_agent_dir, eval_pre_dir;
    int eval_epoch = 0;
    cmd_eval->add_option("--agent-dir", eval_agent_dir, "saved agent directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd_eval->add_option("--pretrained", eval_pre_dir, "pretrained artifact dir")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd_eval->add_option("--epoch", eval_epoch, "epoch label for the metrics row")
        ->check(CLI::NonNegativeNumber);

    auto* cmd_transfer =
        app.add_subcommand("transfer", "train on one variant, evaluate frozen on another");
    add_common(*cmd_transfer, transfer_a);
    std::string transfer_pre_dir;
    Variant transfer_eval = Variant::RandomMixed;
    cmd_transfer->add_option("--pretrained", transfer_pre_dir,
                             "pretrained artifact dir (default <out>/pretrain)");
    cmd_transfer->add_option("--eval-variant", transfer_eval, "variant the tests run on")
        ->transform(CLI::CheckedTransformer(kVariantNames, CLI::ignore_case));

    auto* cmd_base = app.add_subcommand("baseline", "train the pixel-input baseline");
    add_common(*cmd_base, base_a);

    auto* cmd_render = app.add_subcommand("render-sample", "dump game frames as PGM");
    add_common(*cmd_render, render_a);
    int render_steps = 12;
    cmd_render->add_option("--steps", render_steps, "frames to dump")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_pre) {
            ExperimentConfig cfg = resolve(pre_a);
            fs::path out = fs::path(pre_a.out_dir) / "pretrain";
            fs::create_directories(out);
            PretrainResult pre = pretrain_autoencoder(cfg);
            save_pretrain(out.string(), pre);
            print_pretrain_summary(pre);
            std::printf("wrote %s\n", out.string().c_str());
            return 0;
        }
        if (*cmd_train) {
            ExperimentConfig cfg = resolve(train_a);
            fs::path out = train_a.out_dir;
            fs::path pdir = train_pre_dir.empty() ? out / "pretrain" : fs::path(train_pre_dir);
            PretrainResult pre;
            PretrainResult* pp = nullptr;
            if (cfg.agent == AgentKind::Symbolic) {
                pre = ensure_pretrained(cfg, pdir);
                pp = &pre;
            }
            return run_and_persist(cfg, out, pp);
        }
        if (*cmd_eval) {
            ExperimentConfig cfg = resolve(eval_a);
            PretrainResult pre = load_pretrain(eval_pre_dir, cfg);
            SymbolicAgent agent = load_agent(eval_agent_dir);
            MetricsRow row = evaluate_agent(cfg, pre, agent, cfg.variant, eval_epoch);
            fs::create_directories(eval_a.out_dir);
            fs::path csv = fs::path(eval_a.out_dir) / "metrics.csv";
            write_metrics_csv(csv.string(), {row});
            if (row.pct_positive)
                std::printf("score %+.3f, pct_positive %.2f over %ld encounters\n", row.avg_score,
                            *row.pct_positive, row.encountered);
            else
                std::printf("score %+.3f, nothing encountered\n", row.avg_score);
            std::printf("wrote %s\n", csv.string().c_str());
            return 0;
        }
        if (*cmd_transfer) {
            ExperimentConfig cfg = resolve(transfer_a);
            if (!transfer_a.o_variant->count()) cfg.variant = Variant::GridMixed;
            fs::path out = transfer_a.out_dir;
            fs::path pdir =
                transfer_pre_dir.empty() ? out / "pretrain" : fs::path(transfer_pre_dir);
            PretrainResult pre;
            PretrainResult* pp = nullptr;
            if (cfg.agent == AgentKind::Symbolic) {
                pre = ensure_pretrained(cfg, pdir);
                pp = &pre;
            }
            return run_and_persist(cfg, out, pp, transfer_eval);
        }
        if (*cmd_base) {
            ExperimentConfig cfg = resolve(base_a);
            cfg.agent = AgentKind::Dqn;
            return run_and_persist(cfg, base_a.out_dir, nullptr);
        }
        if (*cmd_render) {
            ExperimentConfig cfg = resolve(render_a);
            fs::path out = render_a.out_dir;
            fs::create_directories(out);
            GridGame game(cfg.variant, cfg.seed, game_config(cfg, render_steps));
            Rng policy(derive_seed(cfg.seed, seedtag::kPolicy));
            char name[32];
            std::snprintf(name, sizeof name, "frame_%03d.pgm", 0);
            write_pgm(game.render(), (out / name).string());
            for (int s = 1; s <= render_steps && !game.terminal(); ++s) {
                auto step = game.step(static_cast<Action>(policy.uniform_index(kNumActions)));
                std::snprintf(name, sizeof name, "frame_%03d.pgm", s);
                write_pgm(step.frame, (out / name).string());
            }
            std::printf("wrote %d frames to %s\n", render_steps + 1, out.string().c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
