#include <Eigen/Dense>

#include "protovae/error.hpp"
#include "protovae/evalkit/evalkit.hpp"

namespace protovae::evalkit {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor project(const Tensor& X, const Eigen::VectorXd& center, const Eigen::MatrixXd& basis) {
    const Eigen::Map<const RowMatrix> x(X.data(), static_cast<Eigen::Index>(X.rows()),
                                        static_cast<Eigen::Index>(X.cols()));
    const RowMatrix coords = (x.rowwise() - center.transpose()) * basis;
    Tensor out({X.rows(), 2});
    Eigen::Map<RowMatrix>(out.data(), coords.rows(), 2) = coords;
    return out;
}

}  // namespace

Projection project_2d(const EmbeddingSet& emb, const Tensor* extra) {
    const std::size_t n = emb.Z.rows(), L = emb.Z.cols();
    if (n < 2) throw ContractError("project_2d: needs at least two points");
    if (L < 2) throw ShapeError("project_2d: embeddings need at least two dimensions");
    if (extra && extra->cols() != L) throw ShapeError("project_2d: extra points have the wrong width");

    const Eigen::Map<const RowMatrix> Z(emb.Z.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(L));
    const Eigen::VectorXd center = Z.colwise().mean().transpose();
    const RowMatrix centered = Z.rowwise() - center.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("project_2d: eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    const Eigen::VectorXd values = eig.eigenvalues().reverse();
    if (!(values(0) > 1e-12 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff())) || !(values(0) > 0.0)) {
        throw DomainError("project_2d: zero-variance data gives a degenerate basis");
    }
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(L), 2);
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(L) - 1 - c);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;  // fix the sign so output is reproducible
        basis.col(c) = v;
    }

    Projection out;
    out.center = Tensor({L});
    for (std::size_t l = 0; l < L; ++l) out.center[l] = center(static_cast<Eigen::Index>(l));
    out.basis = Tensor({L, 2});
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t c = 0; c < 2; ++c) out.basis(l, c) = basis(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c));
    out.eigenvalues.assign(values.data(), values.data() + values.size());
    for (double& v : out.eigenvalues) v = std::max(v, 0.0);
    out.coords = project(emb.Z, center, basis);
    if (extra) out.extra_coords = project(*extra, center, basis);
    return out;
}

}  // namespace protovae::evalkit
