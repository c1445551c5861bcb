#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "ettwin/core/error.hpp"
#include "ettwin/estimator/estimator.hpp"

namespace ettwin::estimator {

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::vector<float> block_means(const QuantizedImage& img, const FeatureGrid& grid) {
    const int h = img.height(), w = img.width();
    if (grid.height <= 0 || grid.width <= 0 || h < grid.height || w < grid.width)
        throw Error(ErrorKind::Validation, "image smaller than the feature grid");
    std::vector<float> out(static_cast<std::size_t>(grid.dimension()));
    for (int r = 0; r < grid.height; ++r) {
        const int y0 = r * h / grid.height, y1 = (r + 1) * h / grid.height;
        for (int c = 0; c < grid.width; ++c) {
            const int x0 = c * w / grid.width, x1 = (c + 1) * w / grid.width;
            std::uint32_t sum = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) sum += img.at(x, y);
            const double count = static_cast<double>((y1 - y0) * (x1 - x0));
            out[static_cast<std::size_t>(r) * grid.width + c] = static_cast<float>(sum / (255.0 * count));
        }
    }
    return out;
}

Eigen::VectorXd featurize(const QuantizedImage& img, const FeatureGrid& grid, const Normalization* norm) {
    const auto raw = block_means(img, grid);
    const auto d = static_cast<Eigen::Index>(raw.size());
    Eigen::VectorXd f(d + 1);
    for (Eigen::Index i = 0; i < d; ++i) f[i] = raw[static_cast<std::size_t>(i)];
    if (norm) f.head(d) = (f.head(d) - norm->mean).cwiseQuotient(norm->std);
    f[d] = 1.0;
    return f;
}

Eigen::VectorXd RidgeGazeModel::standardize(std::span<const float> raw) const {
    const auto d = static_cast<Eigen::Index>(raw.size());
    if (d != dimension()) throw Error(ErrorKind::Validation, "feature length does not match the model grid");
    Eigen::VectorXd f(d + 1);
    for (Eigen::Index i = 0; i < d; ++i)
        f[i] = (raw[static_cast<std::size_t>(i)] - normalization.mean[i]) / normalization.std[i];
    f[d] = 1.0;
    return f;
}

Vec3 RidgeGazeModel::predict_raw(std::span<const float> raw) const {
    const Eigen::VectorXd f = standardize(raw);
    const Vec3 out = weights.transpose() * f;
    const double n = out.norm();
    if (!(n >= 1e-9)) throw Error(ErrorKind::DegeneratePrediction, "degenerate prediction (zero gaze vector)");
    return out / n;
}

nlohmann::json RidgeGazeModel::to_json() const {
    nlohmann::json j;
    j["kind"] = "ridge";
    j["feature_height"] = grid.height;
    j["feature_width"] = grid.width;
    j["lambda"] = lambda;
    j["train_feature_mean"] = vector_to_json(normalization.mean);
    j["train_feature_std"] = vector_to_json(normalization.std);
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < weights.rows(); ++r) w.push_back({weights(r, 0), weights(r, 1), weights(r, 2)});
    j["weights"] = std::move(w);
    return j;
}

RidgeGazeModel RidgeGazeModel::from_json(const nlohmann::json& j) {
    RidgeGazeModel m;
    m.grid = {j.at("feature_height").get<int>(), j.at("feature_width").get<int>()};
    m.lambda = j.at("lambda").get<double>();
    m.normalization.mean = vector_from_json(j.at("train_feature_mean"));
    m.normalization.std = vector_from_json(j.at("train_feature_std"));
    const auto& w = j.at("weights");
    m.weights.resize(static_cast<Eigen::Index>(w.size()), 3);
    for (std::size_t r = 0; r < w.size(); ++r)
        for (int c = 0; c < 3; ++c) m.weights(static_cast<Eigen::Index>(r), c) = w[r][c].get<double>();
    if (m.weights.rows() != m.dimension() + 1 || m.normalization.mean.size() != m.dimension() ||
        m.normalization.std.size() != m.dimension())
        throw Error(ErrorKind::Validation, "ridge checkpoint dimensions are inconsistent");
    return m;
}

RidgeGazeModel fit_ridge(const Eigen::MatrixXd& features, const Eigen::MatrixXd& gazes, double lambda,
                         const FeatureGrid& grid) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols() - 1;
    if (n < 2) throw Error(ErrorKind::Validation, "ridge fit needs at least 2 samples");
    if (d != grid.dimension()) throw Error(ErrorKind::Validation, "feature width does not match the grid");
    if (gazes.rows() != n || gazes.cols() != 3) throw Error(ErrorKind::Validation, "gaze matrix must be N x 3");
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Validation, "lambda must be >= 0");

    RidgeGazeModel model;
    model.grid = grid;
    model.lambda = lambda;
    const Eigen::MatrixXd raw = features.leftCols(d);
    model.normalization.mean = raw.colwise().mean().transpose();
    Eigen::MatrixXd x(n, d + 1);
    x.leftCols(d) = raw.rowwise() - model.normalization.mean.transpose();
    model.normalization.std = (x.leftCols(d).colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();
    for (Eigen::Index i = 0; i < d; ++i) {
        double& s = model.normalization.std[i];
        if (!(s > 1e-12)) s = 1.0;
    }
    x.leftCols(d) = x.leftCols(d) * model.normalization.std.cwiseInverse().asDiagonal();
    x.col(d).setOnes();

    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
        qr.setThreshold(1e-10);
        if (qr.rank() < d + 1)
            throw Error(ErrorKind::IllConditioned, "ill-conditioned fit: singular design at lambda = 0; use lambda > 0");
        model.weights = qr.solve(gazes);
        return model;
    }

    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(d + 1, d + 1);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    normal.diagonal().head(d).array() += lambda;
    const Eigen::MatrixXd rhs = x.transpose() * gazes;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(normal);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::IllConditioned, "ill-conditioned fit: normal matrix not positive definite");
    model.weights = llt.solve(rhs);
    return model;
}

Vec3 predict(const RidgeGazeModel& model, const QuantizedImage& img) {
    const auto raw = block_means(img, model.grid);
    return model.predict_raw(raw);
}

}  // namespace ettwin::estimator
