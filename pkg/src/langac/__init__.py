"""langac: actor-critic training for language agents with a text critic.

Two tiers share this package. The desk tier runs the whole evaluation and
improvement machinery symbolically on finite MDPs, where every claim can be
checked against exact dynamic-programming oracles. The orchestration tier
drives the same component structure as prompt calls against a
chat-completions endpoint, collecting rollouts from episodic environments and
emitting supervision records for an external trainer.
"""

__version__ = "0.1.0"
