// ssod command-line driver.

#include <cstdint>
#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "ssod/commands.hpp"
#include "ssod/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised oriented detection label engine"};
    app.require_subcommand(1);

    ssod::cli::SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate synthetic ground-truth scenes");
    c_sim->add_option("--config", sim.config, "JSON run config");
    c_sim->add_option("--seed", sim.seed, "RNG seed")->required();
    c_sim->add_option("--out", sim.out, "Output scenes (JSON lines)")->required();

    ssod::cli::TeacherArgs tch;
    auto* c_tch = app.add_subcommand("teacher", "Simulate teacher predictions and proposals");
    c_tch->add_option("--config", tch.config, "JSON run config");
    c_tch->add_option("--scenes", tch.scenes, "Input scenes (JSON lines)")->required()->check(CLI::ExistingFile);
    c_tch->add_option("--seed", tch.seed, "RNG seed")->required();
    c_tch->add_option("--out", tch.out, "Output predictions (JSON lines)")->required();

    ssod::cli::PseudolabelArgs psl;
    auto* c_psl = app.add_subcommand("pseudolabel", "Size-aware adaptive thresholding");
    c_psl->add_option("--preds", psl.preds, "Teacher predictions")->required()->check(CLI::ExistingFile);
    c_psl->add_option("--p", psl.p, "Percentile in [0, 100]")->capture_default_str();
    c_psl->add_option("--floor", psl.floor, "Candidate score floor")->capture_default_str();
    c_psl->add_option("--out", psl.out, "Output pseudo-labels (JSON lines)")->required();
    c_psl->add_option("--report", psl.report, "Output threshold report")->required();

    ssod::cli::AssignArgs asg;
    auto* c_asg = app.add_subcommand("assign", "Anchor assignment for pseudo-labels");
    c_asg->add_option("--pseudo", asg.pseudo, "Pseudo-labels")->required()->check(CLI::ExistingFile);
    c_asg->add_option("--config", asg.config, "JSON run config");
    c_asg->add_option("--k", asg.k, "Candidates per pseudo-box")->capture_default_str();
    c_asg->add_flag("--baseline-iou", asg.baseline_iou, "Use max-IoU assignment at 0.5");
    c_asg->add_option("--out", asg.out, "Output assignment report")->required();

    ssod::cli::NegativesArgs neg;
    auto* c_neg = app.add_subcommand("negatives", "Teacher-guided negative selection");
    c_neg->add_option("--preds", neg.preds, "Teacher predictions and proposals")->required()->check(CLI::ExistingFile);
    c_neg->add_option("--assign", neg.assign, "Assignment report")->required()->check(CLI::ExistingFile);
    c_neg->add_option("--bg-thr", neg.bg_thr, "Background score threshold")->capture_default_str();
    c_neg->add_option("--s-max", neg.s_max, "Hard negative score bound")->capture_default_str();
    c_neg->add_option("--out", neg.out, "Output negatives report")->required();

    ssod::cli::EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "AP / false-alarm evaluation");
    c_ev->add_option("--preds", ev.preds, "Predictions")->required()->check(CLI::ExistingFile);
    c_ev->add_option("--gt", ev.gt, "Ground truth")->required()->check(CLI::ExistingFile);
    c_ev->add_option("--iou", ev.iou, "Match IoU threshold")->capture_default_str();
    c_ev->add_option("--out", ev.out, "Output report")->required();

    ssod::cli::PipelineArgs pl;
    auto* c_pl = app.add_subcommand("pipeline", "Run teacher-student iterations");
    c_pl->add_option("--config", pl.config, "JSON run config");
    c_pl->add_option("--iters", pl.iters, "Iterations")->required();
    c_pl->add_option("--seed", pl.seed, "RNG seed")->required();
    c_pl->add_option("--out", pl.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_sim->parsed()) ssod::cli::simulate(sim);
        else if (c_tch->parsed()) ssod::cli::teacher(tch);
        else if (c_psl->parsed()) ssod::cli::pseudolabel(psl);
        else if (c_asg->parsed()) ssod::cli::assign(asg);
        else if (c_neg->parsed()) ssod::cli::negatives(neg);
        else if (c_ev->parsed()) ssod::cli::evaluate(ev);
        else if (c_pl->parsed()) ssod::cli::pipeline(pl);
    } catch (const std::exception& e) {
        std::cerr << "ssod: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
