#pragma once
// Umbrella header for the numerical library. The command-line layer
// (lpscat/cli.hpp) is separate because it links OpenSSL.

#include "lpscat/errors.hpp"
#include "lpscat/grid.hpp"
#include "lpscat/io.hpp"
#include "lpscat/lp.hpp"
#include "lpscat/norms.hpp"
#include "lpscat/potentials.hpp"
#include "lpscat/resolvent.hpp"
#include "lpscat/scattering.hpp"
#include "lpscat/cgo.hpp"
#include "lpscat/bench.hpp"
