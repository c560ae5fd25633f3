#pragma once

#include "secpn/angular_basis.hpp"
#include "secpn/errors.hpp"
#include "secpn/fem_solver.hpp"
#include "secpn/marshak_boundary.hpp"
#include "secpn/mesh.hpp"
#include "secpn/pn_assembly.hpp"
#include "secpn/reference_solvers.hpp"
#include "secpn/scattering.hpp"
#include "secpn/sphere_quadrature.hpp"
