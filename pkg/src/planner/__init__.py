from .decisions import (ChannelSplit, DwSplit, FpgaWhole, GpuOnly, PartitionDecision, PartitionPlan, PlanVersion,
                        ResourceUsage, decision_key)
from .objective import Objective
from .validation import (canonical_plan, check_plan_structure, fpga_mapped_count, plan_resources, validate_plan,
                         PlanVerdict)
from .candidates import enumerate_candidates, g_grid

# `planner.optimizer` imports the simulator, which imports this package; import it directly.
