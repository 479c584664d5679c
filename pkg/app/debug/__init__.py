from .port import DebugSession, FlipResult
