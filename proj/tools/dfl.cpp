// Copyright 2026 The dfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dfl: configured feedback-control experiments.
//
// Exit codes: 0 success, 1 numeric failure, 2 usage error, 3 invariant violation.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfl/experiments/scenarios.hpp"

namespace {

struct CommonOptions {
  std::string config_file;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> trajectories;
  std::optional<double> dt;
  std::optional<double> t_final;
  bool full_scale = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_file, "key=value config file");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--out", o.out_dir, "output directory (default: out/<scenario>)");
  sub->add_option("--trajectories", o.trajectories, "trajectories per ensemble");
  sub->add_option("--dt", o.dt, "integration step");
  sub->add_option("--t-final", o.t_final, "simulated time");
  sub->add_flag("--full-scale", o.full_scale, "use full trajectory counts");
  sub->add_option("overrides", o.overrides, "key=value overrides");
}

int run(dfl::experiments::Scenario scenario, const CommonOptions& o) {
  using namespace dfl::experiments;
  KeyValueConfig kv;
  if (!o.config_file.empty()) kv.load_file(o.config_file);
  if (o.full_scale) kv.set("full_scale", "true");
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (o.trajectories) kv.set("trajectories", std::to_string(*o.trajectories));
  if (o.dt) kv.set("dt", format_double(*o.dt));
  if (o.t_final) kv.set("t_final", format_double(*o.t_final));
  for (const auto& pair : o.overrides) kv.set_pair(pair);

  const ExperimentConfig config = resolve_config(scenario, kv);
  if (const auto unused = kv.unused_keys(); !unused.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unused) msg += " " + k;
    throw UsageError(msg);
  }
  const std::string dir = o.out_dir.empty() ? "out/" + scenario_stem(scenario) : o.out_dir;
  const auto res = execute(config, dir);
  std::cout << res.summary.dump(2) << "\n";
  std::cout << "wrote " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dfl::experiments;
  CLI::App app{"dfl: feedback-control bounds and trajectory experiments"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::vector<std::pair<CLI::App*, Scenario>> subs;
  for (const auto& [name, scenario] : scenario_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " scenario");
    add_common(sub, opts);
    subs.emplace_back(sub, scenario);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const auto& [sub, scenario] : subs) {
      if (sub->parsed()) return run(scenario, opts);
    }
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const dfl::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantViolation& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const dfl::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
