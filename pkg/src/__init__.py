"""Source package initialization.""" 