// Trains DirectAU and RAU on the two-cluster synthetic set and compares test
// metrics. Usage: synthetic_training [max_epochs]

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "rau/rau.hpp"

int main(int argc, char** argv) {
  const std::size_t max_epochs = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 100;
  const auto ds = rau::make_two_cluster_dataset({}, 42);
  const auto split = rau::split_per_user(ds, rau::kDefaultSplitRatios, 42);
  std::printf("%zu users, %zu items, %zu train / %zu validation / %zu test\n", ds.num_users(),
              ds.num_items(), split.train.size(), split.validation.size(), split.test.size());

  for (const auto objective : {rau::Objective::directau, rau::Objective::rau}) {
    rau::TrainConfig cfg;
    cfg.objective = objective;
    cfg.max_epochs = max_epochs;
    cfg.eval_k_for_stopping = 10;
    cfg.seed = 42;

    const auto fitted = rau::fit(split, cfg);
    rau::Trainer trainer(split, cfg);
    trainer.set_state(fitted.best);
    const auto test = trainer.evaluate(rau::EvalPart::test, {10, 20});
    const auto& first = fitted.report.epochs.front().diagnostics;
    const auto& last = fitted.report.epochs.back().diagnostics;
    std::printf("\n%s: best epoch %zu of %zu, align %.4f -> %.4f\n",
                std::string(rau::objective_name(objective)).c_str(), fitted.report.best_epoch,
                fitted.report.epochs_run, first.align, last.align);
    std::cout << rau::to_table(test);
  }
}
