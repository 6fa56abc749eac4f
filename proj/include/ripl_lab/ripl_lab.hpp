#pragma once

#include "ripl_lab/allocation.hpp"
#include "ripl_lab/coherence.hpp"
#include "ripl_lab/common.hpp"
#include "ripl_lab/hermitian_eigen.hpp"
#include "ripl_lab/levels.hpp"
#include "ripl_lab/operators.hpp"
#include "ripl_lab/recovery.hpp"
#include "ripl_lab/ripl.hpp"
#include "ripl_lab/sampling.hpp"
#include "ripl_lab/serialize.hpp"
