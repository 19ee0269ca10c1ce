"""Models package initialization.""" 