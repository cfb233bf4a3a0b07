#pragma once

#include "hmaxwell/quadrature.hpp"
#include "hmaxwell/geometry.hpp"
#include "hmaxwell/mesh.hpp"
#include "hmaxwell/whitney.hpp"
#include "hmaxwell/polynomial.hpp"
#include "hmaxwell/fem.hpp"
#include "hmaxwell/dual_basis.hpp"
#include "hmaxwell/cluster.hpp"
#include "hmaxwell/hmatrix.hpp"
#include "hmaxwell/inverse_lab.hpp"
#include "hmaxwell/harmonic_lab.hpp"
#include "hmaxwell/checks.hpp"
