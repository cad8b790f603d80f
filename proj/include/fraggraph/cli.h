/*
 * Copyright 2026 The FragGraph Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FRAGGRAPH_CLI_H_
#define FRAGGRAPH_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "fraggraph/run_config.h"

namespace fraggraph {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Stage entry points; each reads its inputs from disk and writes its
// artifacts under config.paths.output_dir. They throw; run_cli maps errors
// to exit codes.
void cmd_gen(const RunConfig& config, std::ostream& out,
             const std::string& session_log_dir = "");
void cmd_build(const RunConfig& config, std::ostream& out);
void cmd_train_eval(const RunConfig& config, std::ostream& out);
// `inputs` are combined files or session logs; empty means the configured
// corpus. Returns the number of chains scored.
std::size_t cmd_score(const RunConfig& config, const std::string& model_path,
                      const std::vector<std::string>& inputs, std::ostream& out);
// Returns false when any variant exceeds `tolerance`.
bool cmd_gradcheck(const RunConfig& config, double tolerance, std::ostream& out);
void cmd_audit(const RunConfig& config, std::ostream& out);

// Provenance block embedded in artifacts: config hash, corpus hash, seed.
Json provenance(const RunConfig& config, const std::string& corpus_hash);
// Hash of the configured corpus files.
std::string corpus_hash(const RunConfig& config);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace fraggraph

#endif  // FRAGGRAPH_CLI_H_
