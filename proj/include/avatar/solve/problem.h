#pragma once

#include "avatar/types.h"

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace avatar::solve {

// One small parameter block (a vertex offset, a scalar edge offset, the
// shape coefficients, ...). Blocks are referenced by index.
struct ParameterBlock {
    std::string name;
    VecX values;
    VecX lower;  // empty = unbounded
    VecX upper;
    int columnOffset = 0;  // assigned by the problem
};

// A residual block evaluates a residual vector and its dense Jacobians with
// respect to each referenced parameter block. Robustification (if any) is
// applied by the solver on top of the raw residual.
class ResidualBlock {
public:
    virtual ~ResidualBlock() = default;

    virtual int residualSize() const = 0;
    virtual const std::vector<int>& parameterBlocks() const = 0;

    // params[i] is the current value of parameterBlocks()[i]. When
    // jacobians is non-null it holds one residualSize() x blockSize matrix
    // per referenced block, already sized; fill them.
    virtual void evaluate(const std::vector<const VecX*>& params,
                          VecX& residual,
                          std::vector<MatX>* jacobians) const = 0;
};

// Convenience base holding the block list.
class ResidualBlockBase : public ResidualBlock {
public:
    explicit ResidualBlockBase(std::vector<int> blocks)
        : blocks_(std::move(blocks)) {}
    const std::vector<int>& parameterBlocks() const override { return blocks_; }

private:
    std::vector<int> blocks_;
};

struct ResidualEntry {
    std::unique_ptr<ResidualBlock> block;
    std::string term;      // cost-breakdown label ("silh", "face", ...)
    double weight = 1.0;   // multiplies the squared (or robust) cost
    double robustSigma = 0.0;  // > 0 enables Geman-McClure with this scale
};

class Problem {
public:
    int addParameterBlock(const std::string& name, const VecX& initial);
    int addParameterBlock(const std::string& name, const VecX& initial,
                          const VecX& lower, const VecX& upper);

    void addResidualBlock(std::unique_ptr<ResidualBlock> block,
                          const std::string& term, double weight = 1.0,
                          double robustSigma = 0.0);

    // Drop all residual blocks with the given term label (for
    // re-association between alternation rounds).
    void clearTerm(const std::string& term);

    // Multiply the weight of every block with the given term label.
    void scaleTermWeight(const std::string& term, double factor);
    double termWeight(const std::string& term) const;

    int parameterBlockCount() const { return static_cast<int>(params_.size()); }
    ParameterBlock& parameterBlock(int i) { return params_[i]; }
    const ParameterBlock& parameterBlock(int i) const { return params_[i]; }

    int totalParameterSize() const { return totalParams_; }
    const std::vector<ResidualEntry>& residuals() const { return entries_; }

    // Gather / scatter the stacked parameter vector.
    VecX packParameters() const;
    void unpackParameters(const VecX& x);

private:
    std::vector<ParameterBlock> params_;
    std::vector<ResidualEntry> entries_;
    int totalParams_ = 0;
};

}  // namespace avatar::solve
