#include <algorithm>
#include <set>

#include "ettwin/core/error.hpp"
#include "ettwin/core/metrics.hpp"
#include "ettwin/estimator/estimator.hpp"

namespace ettwin::estimator {

EvalResult evaluate(const FramePredictor& predict, std::span<const GazeSample> test_labels,
                    std::span<const int> train_identities, int trial_id) {
    if (test_labels.empty()) throw Error(ErrorKind::EmptyInput, "evaluation needs a non-empty test set");
    const std::set<int> train(train_identities.begin(), train_identities.end());
    for (const auto& s : test_labels)
        if (train.contains(s.identity_id))
            throw Error(ErrorKind::ContaminatedSplit,
                        "contaminated split: identity " + std::to_string(s.identity_id) + " is in train and test");

    EvalResult r;
    r.trial_id = trial_id;
    r.n_frames = test_labels.size();
    r.errors.reserve(test_labels.size());
    for (std::size_t i = 0; i < test_labels.size(); ++i) {
        try {
            r.errors.push_back(angular_error(predict(i), test_labels[i].gaze));
        } catch (const Error&) {
            r.errors.push_back(kFailurePenaltyDeg);
            ++r.n_failures;
        }
    }
    r.p50 = percentile(r.errors, 50.0);
    r.p75 = percentile(r.errors, 75.0);
    r.p95 = percentile(r.errors, 95.0);
    return r;
}

}  // namespace ettwin::estimator
