// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dysink/dysink.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> policy;
    std::optional<std::string> scenario;
    std::optional<std::size_t> blocks;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "key = value config file");
    cmd->add_option("--out", o.out_path, "output path")->required();
    cmd->add_option("--seed", o.seed, "override seed");
    cmd->add_option("--policy", o.policy, "window | static:<S> | dysink");
    cmd->add_option("--scenario", o.scenario, "drift | revisit | adversarial");
    cmd->add_option("--blocks", o.blocks, "override total_blocks");
}

dysink::RolloutConfig resolve(const Overrides& o) {
    dysink::RolloutConfig cfg = o.config_path.empty() ? dysink::RolloutConfig{} : dysink::load_config(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.policy) cfg.policy = dysink::parse_policy(*o.policy);
    if (o.scenario) cfg.scenario = dysink::parse_scenario(*o.scenario);
    if (o.blocks) cfg.total_blocks = *o.blocks;
    cfg.validate();
    return cfg;
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json to_json(const dysink::ComparisonSummary& s) {
    nlohmann::json out;
    out["scenario"] = dysink::to_string(s.base.scenario);
    out["seed"] = s.base.seed;
    out["total_blocks"] = s.base.total_blocks;
    out["policies"] = nlohmann::json::array();
    for (const auto& p : s.policies) {
        out["policies"].push_back({
            {"policy", dysink::to_string(p.policy)},
            {"steps", p.steps},
            {"gate_rate", optional_json(p.gate_rate)},
            {"mean_retrieval_score", optional_json(p.mean_retrieval_score)},
            {"mean_context_tokens", p.mean_context_tokens},
            {"max_context_tokens", p.max_context_tokens},
            {"final_bank_size", p.final_bank_size},
            {"revisit_steps", p.revisit.steps},
            {"revisit_hits", p.revisit.hits},
            {"revisit_hit_rate", optional_json(p.revisit.rate())},
        });
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming attention-context simulator: window-only, static-sink and dynamic-sink policies"};
    app.require_subcommand(1);

    Overrides run_opts;
    std::string bank_out;
    auto* run = app.add_subcommand("run", "run one rollout and write its line-delimited trace");
    add_common(run, run_opts);
    run->add_option("--bank-out", bank_out, "also write the final memory bank snapshot");

    Overrides cmp_opts;
    auto* compare = app.add_subcommand("compare", "run all three policies on one stream and write a JSON summary");
    add_common(compare, cmp_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = resolve(run_opts);
            dysink::Rollout rollout(cfg);
            std::vector<dysink::StepRecord> trace;
            for (std::size_t b = 0; b < cfg.total_blocks; ++b) {
                trace.push_back(rollout.step());
            }
            dysink::write_trace_file(run_opts.out_path, trace);
            if (!bank_out.empty()) {
                std::ofstream out(bank_out, std::ios::binary);
                rollout.bank().write_snapshot(out);
            }
        } else {
            const auto summary = dysink::compare_policies(resolve(cmp_opts));
            std::ofstream out(cmp_opts.out_path);
            if (!out) {
                throw dysink::Error("cannot open " + cmp_opts.out_path);
            }
            out << to_json(summary).dump(2) << '\n';
        }
    } catch (const dysink::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
