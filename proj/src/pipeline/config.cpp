#include "avatar/pipeline/config.h"

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace avatar::pipeline {

using nlohmann::json;

namespace {

// Reads known keys from an object and rejects anything unrecognized.
class Schema {
public:
    Schema(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw InputFormatError(path_ + ": expected an object");
    }
    ~Schema() noexcept(false) {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                throw InputFormatError(path_ + ": unknown key \"" + key + "\"");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw InputFormatError(path_ + "." + key + ": " + e.what());
        }
    }

    const json* object(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string sub(const char* key) const { return path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void readSolver(const json* j, const std::string& path,
                solve::SolverOptions& s) {
    if (!j)
        return;
    Schema schema(*j, path);
    schema.get("max_iterations", s.maxIterations);
    schema.get("gradient_tolerance", s.gradientTolerance);
    schema.get("function_tolerance", s.functionTolerance);
    schema.get("initial_trust_radius", s.initialTrustRadius);
    schema.get("min_trust_radius", s.minTrustRadius);
    schema.get("normal_equation_damping", s.normalEquationDamping);
}

void readMedium(const json* j, const std::string& path,
                medium::MediumConfig& m) {
    if (!j)
        return;
    Schema schema(*j, path);
    schema.get("match_threshold_px", m.matchThresholdPx);
    schema.get("silhouette_weight", m.silhouetteWeight);
    schema.get("face_weight", m.faceWeight);
    schema.get("lap_weight", m.lapWeight);
    schema.get("ridge_weight", m.ridgeWeight);
    schema.get("sym_weight", m.symWeight);
    schema.get("robust_sigma", m.robustSigma);
    schema.get("rounds", m.rounds);
    schema.get("warmup_rounds", m.warmupRounds);
    schema.get("min_keyframes", m.minKeyframes);
    schema.get("min_coverage_deg", m.minCoverageDeg);
    schema.get("enforce_coverage", m.enforceCoverage);
    readSolver(schema.object("solver"), schema.sub("solver"), m.solver);
}

void readFine(const json* j, const std::string& path, fine::FineConfig& f) {
    if (!j)
        return;
    Schema schema(*j, path);
    schema.get("lambda_neighbor", f.lambdaNeighbor);
    schema.get("silhouette_weight", f.silhouetteWeight);
    schema.get("face_weight", f.faceWeight);
    schema.get("sfs_weight", f.sfsWeight);
    schema.get("match_weight", f.matchWeight);
    schema.get("lap_weight", f.lapWeight);
    schema.get("struc_weight", f.strucWeight);
    schema.get("cons_weight", f.consWeight);
    schema.get("silh_match_threshold_px", f.silhMatchThresholdPx);
    schema.get("ray_robust_sigma", f.rayRobustSigma);
    schema.get("match_robust_sigma", f.matchRobustSigma);
    schema.get("match_grid_spacing_px", f.matchGridSpacingPx);
    schema.get("match_score_threshold", f.matchScoreThreshold);
    schema.get("alpha_max_deg", f.alphaMaxDeg);
    schema.get("depth_tolerance", f.depthTolerance);
    schema.get("dihedral_tau_deg", f.dihedralTauDeg);
    schema.get("consensus_ema", f.consensusEma);
    schema.get("rounds", f.rounds);
    readSolver(schema.object("solver"), schema.sub("solver"), f.solver);
}

void readNormals(const json* j, const std::string& path,
                 shading::NormalEstimationOptions& n) {
    if (!j)
        return;
    Schema schema(*j, path);
    schema.get("smoothness_weight", n.smoothnessWeight);
    schema.get("max_iterations", n.maxIterations);
}

void readMerge(const json* j, const std::string& path,
               texture::MergeConfig& m) {
    if (!j)
        return;
    Schema schema(*j, path);
    schema.get("vis_weight", m.visWeight);
    schema.get("gmm_weight", m.gmmWeight);
    schema.get("face_weight", m.faceWeight);
    schema.get("silh_weight", m.silhWeight);
    schema.get("proposal_epsilon", m.proposalEpsilon);
    schema.get("proposal_cap", m.proposalCap);
    schema.get("face_label", m.faceLabel);
    schema.get("ssim_window", m.ssimWindow);
    schema.get("blend_band", m.blendBand);
    schema.get("fill_passes", m.fillPasses);
}

void readFuse(const json* j, const std::string& path, texture::FuseOptions& f) {
    if (!j)
        return;
    Schema schema(*j, path);
    schema.get("label_count", f.labelCount);
    schema.get("potts_weight", f.pottsWeight);
    schema.get("max_sweeps", f.maxSweeps);
    if (const json* gmm = schema.object("gmm")) {
        Schema g(*gmm, schema.sub("gmm"));
        g.get("components", f.gmm.components);
        g.get("em_iterations", f.gmm.emIterations);
        g.get("max_samples", f.gmm.maxSamples);
        g.get("seed", f.gmm.seed);
    }
}

}  // namespace

PipelineConfig loadConfig(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputFormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputFormatError(path + ": " + e.what());
    }
    PipelineConfig config;
    Schema schema(j, "config");
    schema.get("medium_keyframes", config.mediumKeyframes);
    schema.get("fine_keyframes", config.fineKeyframes);
    schema.get("atlas_resolution", config.atlasResolution);
    schema.get("subdivision_steps", config.subdivisionSteps);
    schema.get("seed", config.seed);
    schema.get("threads", config.threads);
    schema.get("run_medium", config.runMedium);
    schema.get("run_fine", config.runFine);
    schema.get("run_texture", config.runTexture);
    readMedium(schema.object("medium"), "config.medium", config.medium);
    readFine(schema.object("fine"), "config.fine", config.fine);
    readNormals(schema.object("normals"), "config.normals", config.normals);
    readMerge(schema.object("merge"), "config.merge", config.merge);
    readFuse(schema.object("fuse"), "config.fuse", config.fuse);
    if (config.mediumKeyframes <= 0 || config.fineKeyframes <= 0 ||
        config.atlasResolution <= 0 || config.subdivisionSteps < 0 ||
        config.threads <= 0)
        throw InputFormatError(path + ": non-positive size parameter");
    config.merge.seed = config.seed;
    return config;
}

void saveConfig(const std::string& path, const PipelineConfig& config) {
    json j = {{"medium_keyframes", config.mediumKeyframes},
              {"fine_keyframes", config.fineKeyframes},
              {"atlas_resolution", config.atlasResolution},
              {"subdivision_steps", config.subdivisionSteps},
              {"seed", config.seed},
              {"threads", config.threads},
              {"run_medium", config.runMedium},
              {"run_fine", config.runFine},
              {"run_texture", config.runTexture}};
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << j.dump(1) << "\n";
}

}  // namespace avatar::pipeline
