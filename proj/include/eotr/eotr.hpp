#pragma once

#include "eotr/blocks.hpp"
#include "eotr/costs.hpp"
#include "eotr/coupling.hpp"
#include "eotr/exact_ot.hpp"
#include "eotr/gap.hpp"
#include "eotr/logsumexp.hpp"
#include "eotr/measures.hpp"
#include "eotr/rates.hpp"
#include "eotr/regression.hpp"
#include "eotr/sinkhorn.hpp"
#include "eotr/types.hpp"
