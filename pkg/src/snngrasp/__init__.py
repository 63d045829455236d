"""Spiking actor-critic grasping: LIF policy, penalty-contact gripper simulator,
staged curriculum rewards, PPO training and an operation-count energy model."""

__version__ = "0.1.0"
