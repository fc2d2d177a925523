#include "avatar/solve/problem.h"

#include <algorithm>

namespace avatar::solve {

int Problem::addParameterBlock(const std::string& name, const VecX& initial) {
    ParameterBlock b;
    b.name = name;
    b.values = initial;
    b.columnOffset = totalParams_;
    totalParams_ += static_cast<int>(initial.size());
    params_.push_back(std::move(b));
    return static_cast<int>(params_.size()) - 1;
}

int Problem::addParameterBlock(const std::string& name, const VecX& initial,
                               const VecX& lower, const VecX& upper) {
    const int id = addParameterBlock(name, initial);
    if (lower.size() != initial.size() || upper.size() != initial.size())
        throw Error("addParameterBlock: bound size mismatch for " + name);
    params_[id].lower = lower;
    params_[id].upper = upper;
    return id;
}

void Problem::addResidualBlock(std::unique_ptr<ResidualBlock> block,
                               const std::string& term, double weight,
                               double robustSigma) {
    for (int b : block->parameterBlocks()) {
        if (b < 0 || b >= parameterBlockCount())
            throw Error("addResidualBlock: unknown parameter block in term " + term);
    }
    ResidualEntry e;
    e.block = std::move(block);
    e.term = term;
    e.weight = weight;
    e.robustSigma = robustSigma;
    entries_.push_back(std::move(e));
}

void Problem::clearTerm(const std::string& term) {
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const ResidualEntry& e) { return e.term == term; }),
                   entries_.end());
}

void Problem::scaleTermWeight(const std::string& term, double factor) {
    for (ResidualEntry& e : entries_)
        if (e.term == term)
            e.weight *= factor;
}

double Problem::termWeight(const std::string& term) const {
    for (const ResidualEntry& e : entries_)
        if (e.term == term)
            return e.weight;
    return 0.0;
}

VecX Problem::packParameters() const {
    VecX x(totalParams_);
    for (const ParameterBlock& b : params_)
        x.segment(b.columnOffset, b.values.size()) = b.values;
    return x;
}

void Problem::unpackParameters(const VecX& x) {
    if (x.size() != totalParams_)
        throw Error("unpackParameters: size mismatch");
    for (ParameterBlock& b : params_)
        b.values = x.segment(b.columnOffset, b.values.size());
}

}  // namespace avatar::solve
