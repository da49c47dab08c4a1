#pragma once

#include "mesospin/core.hpp"
#include "mesospin/density.hpp"
#include "mesospin/entanglement.hpp"
#include "mesospin/hamiltonian.hpp"
#include "mesospin/largescale.hpp"
#include "mesospin/lattice.hpp"
#include "mesospin/magnification.hpp"
#include "mesospin/measurement.hpp"
#include "mesospin/parallel.hpp"
#include "mesospin/propagator.hpp"
#include "mesospin/spectra.hpp"
#include "mesospin/state.hpp"
