#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "ddlab/covariance.hpp"
#include "ddlab/random.hpp"

namespace ddlab {

/// Law of the independent entries of z in x = Sigma^{1/2} z. All have mean 0, variance 1.
enum class EntryLaw { gaussian, rademacher, uniform_pm_sqrt3 };

inline std::string_view to_string(EntryLaw law) {
    switch (law) {
        case EntryLaw::gaussian: return "gaussian";
        case EntryLaw::rademacher: return "rademacher";
        case EntryLaw::uniform_pm_sqrt3: return "uniform_pm_sqrt3";
    }
    return "?";
}

inline EntryLaw parse_entry_law(std::string_view name) {
    if (name == "gaussian") return EntryLaw::gaussian;
    if (name == "rademacher") return EntryLaw::rademacher;
    if (name == "uniform_pm_sqrt3" || name == "uniform") return EntryLaw::uniform_pm_sqrt3;
    throw InvalidInput("unknown entry law '" + std::string(name) + "'");
}

inline double draw_entry(EntryLaw law, random::Engine& eng) {
    switch (law) {
        case EntryLaw::gaussian: return random::standard_normal(eng);
        case EntryLaw::rademacher: return (eng() >> 63) ? 1.0 : -1.0;
        case EntryLaw::uniform_pm_sqrt3:
            return std::sqrt(3.0) * (2.0 * random::uniform01(eng) - 1.0);
    }
    return 0.0;
}

/// The row distribution mu: x^T = z^T Sigma^{1/2}.
struct MeasureSpec {
    Spectrum spectrum;
    EntryLaw entry_law = EntryLaw::gaussian;

    Index dim() const { return spectrum.dim(); }
    bool is_gaussian() const { return entry_law == EntryLaw::gaussian; }
};

}  // namespace ddlab
