#pragma once

#include <string>
#include <vector>

#include "fedcd/matrix.hpp"
#include "fedcd/model.hpp"

namespace fedcd {

// Parameter checkpoints are plain text so block headers stay greppable, with
// hexfloat payloads so doubles round-trip bit-exactly. Layout:
//
//   fedcd-checkpoint v1
//   entity <client|server>
//   kind <ncd|dina>
//   dims num_students <n> num_exercises <m> dim <d> num_concepts <k>
//   block <name> rows <r> cols <c>
//   <r lines of c space-separated hexfloats>
//   ... further blocks ...
//
// Client checkpoints carry blocks student, exercise, disc, fc1, fc2, fc3 in
// that order (ncd) or student, exercise (dina). A full-personalization server
// checkpoint carries only the exercise block.
struct CheckpointBlock {
    std::string name;
    Matrix values;
};

struct Checkpoint {
    std::string entity;  // "client" or "server"
    std::string kind;    // "ncd" or "dina"
    int num_students = 0;
    int num_exercises = 0;
    int dim = 0;
    int num_concepts = 0;
    std::vector<CheckpointBlock> blocks;

    const Matrix* find_block(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint params_checkpoint(const ModelParams& params, int num_concepts);
ModelParams params_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace fedcd
