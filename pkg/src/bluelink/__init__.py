"""Screen-camera communication over the Blue channel.

Encode data bits into display frames as opposing Blue-channel intensity
steps across Manchester frame pairs, simulate the screen-to-camera optical
channel, extract and unwarp the screen from camera frames, and decode with
either a classical per-cell decoder or a trainable convolutional decoder
that tolerates imprecise screen extraction.
"""

__version__ = "0.1.0"
