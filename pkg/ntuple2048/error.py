class Ntuple2048Error(Exception):
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class GameContractError(Ntuple2048Error):
    """
    A precondition of a game or search operation was violated by the caller
    (spawning on a full board, evaluating an illegal move, searching a terminal board).
    """

    def __init__(self, message: str):
        super().__init__(message)


class ConfigurationError(Ntuple2048Error):
    def __init__(self, message: str):
        super().__init__(message)


class NetworkFormatError(Ntuple2048Error):
    def __init__(self, message: str):
        super().__init__(message)


class ChecksumError(NetworkFormatError):
    def __init__(self, message: str):
        super().__init__(message)


class CheckpointError(Ntuple2048Error):
    def __init__(self, message: str):
        super().__init__(message)


class UsageError(Ntuple2048Error):
    def __init__(self, message: str):
        super().__init__(message)
