#include "fedcd/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedcd/error.hpp"

namespace fedcd {

const Matrix* Checkpoint::find_block(const std::string& name) const {
    for (const auto& block : blocks)
        if (block.name == name) return &block.values;
    return nullptr;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("io", "cannot write checkpoint: " + path);
    f << "fedcd-checkpoint v1\n";
    f << "entity " << checkpoint.entity << '\n';
    f << "kind " << checkpoint.kind << '\n';
    f << "dims num_students " << checkpoint.num_students << " num_exercises "
      << checkpoint.num_exercises << " dim " << checkpoint.dim << " num_concepts "
      << checkpoint.num_concepts << '\n';
    char buffer[48];
    for (const auto& block : checkpoint.blocks) {
        f << "block " << block.name << " rows " << block.values.rows() << " cols "
          << block.values.cols() << '\n';
        for (std::size_t r = 0; r < block.values.rows(); ++r) {
            const auto row = block.values.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::snprintf(buffer, sizeof buffer, "%a", row[c]);
                f << (c ? " " : "") << buffer;
            }
            f << '\n';
        }
    }
    if (!f) throw Error("io", "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("io", "cannot open checkpoint: " + path);
    Checkpoint out;
    std::string line;
    if (!std::getline(f, line) || line != "fedcd-checkpoint v1")
        throw Error("io", path + ": not a fedcd checkpoint");

    auto expect_word = [&path](std::istringstream& in, const std::string& word) {
        std::string got;
        in >> got;
        if (got != word) throw Error("io", path + ": expected '" + word + "', got '" + got + "'");
    };

    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream in(line);
        std::string tag;
        in >> tag;
        if (tag == "entity") {
            in >> out.entity;
        } else if (tag == "kind") {
            in >> out.kind;
        } else if (tag == "dims") {
            expect_word(in, "num_students");
            in >> out.num_students;
            expect_word(in, "num_exercises");
            in >> out.num_exercises;
            expect_word(in, "dim");
            in >> out.dim;
            expect_word(in, "num_concepts");
            in >> out.num_concepts;
        } else if (tag == "block") {
            CheckpointBlock block;
            std::size_t rows = 0, cols = 0;
            in >> block.name;
            expect_word(in, "rows");
            in >> rows;
            expect_word(in, "cols");
            in >> cols;
            block.values = Matrix(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!std::getline(f, line))
                    throw Error("io", path + ": truncated block '" + block.name + "'");
                const char* cursor = line.c_str();
                char* end = nullptr;
                for (std::size_t c = 0; c < cols; ++c) {
                    block.values(r, c) = std::strtod(cursor, &end);
                    if (end == cursor)
                        throw Error("io", path + ": bad value in block '" + block.name + "'");
                    cursor = end;
                }
            }
            out.blocks.push_back(std::move(block));
        } else {
            throw Error("io", path + ": unknown checkpoint line '" + line + "'");
        }
    }
    return out;
}

Checkpoint params_checkpoint(const ModelParams& params, int num_concepts) {
    Checkpoint out;
    out.entity = "client";
    out.kind = to_string(params.kind);
    out.num_students = static_cast<int>(params.student.rows());
    out.num_exercises = static_cast<int>(params.exercise.rows());
    out.dim = params.dim();
    out.num_concepts = num_concepts;
    out.blocks.push_back({"student", params.student});
    out.blocks.push_back({"exercise", params.exercise});
    if (!params.diagnostic.empty()) {
        out.blocks.push_back({"disc", params.diagnostic.w_disc});
        out.blocks.push_back({"fc1", params.diagnostic.w_fc1});
        out.blocks.push_back({"fc2", params.diagnostic.w_fc2});
        out.blocks.push_back({"fc3", params.diagnostic.w_fc3});
    }
    return out;
}

ModelParams params_from_checkpoint(const Checkpoint& checkpoint) {
    ModelParams params;
    params.kind = model_kind_from_string(checkpoint.kind);
    auto required = [&checkpoint](const std::string& name) -> const Matrix& {
        const Matrix* block = checkpoint.find_block(name);
        if (!block) throw Error("io", "checkpoint missing block '" + name + "'");
        return *block;
    };
    params.student = required("student");
    params.exercise = required("exercise");
    if (params.kind == ModelKind::Ncd) {
        params.diagnostic.w_disc = required("disc");
        params.diagnostic.w_fc1 = required("fc1");
        params.diagnostic.w_fc2 = required("fc2");
        params.diagnostic.w_fc3 = required("fc3");
    }
    return params;
}

}  // namespace fedcd
